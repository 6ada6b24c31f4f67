#pragma once

#include <vector>

namespace krrlab {

namespace detail {

template <class Visit>
bool multi_index_step(std::vector<int>& alpha, int pos, int remaining, Visit& visit) {
  const int d = static_cast<int>(alpha.size());
  if (pos == d - 1) {
    alpha[pos] = remaining;
    const bool keep_going = visit(static_cast<const std::vector<int>&>(alpha));
    alpha[pos] = 0;
    return keep_going;
  }
  for (int v = remaining; v >= 0; --v) {
    alpha[pos] = v;
    if (!multi_index_step(alpha, pos + 1, remaining - v, visit)) {
      alpha[pos] = 0;
      return false;
    }
  }
  alpha[pos] = 0;
  return true;
}

}  // namespace detail

/// Visits every alpha in N^d with |alpha| = k, in reverse-lexicographic order
/// ((k,0,..,0) first, (0,..,0,k) last). `visit(const std::vector<int>&)`
/// returns false to stop early. The index of a multi-index within its level
/// is its position in this order.
template <class Visit>
void for_each_multi_index(int d, int k, Visit&& visit) {
  if (d < 1 || k < 0) return;
  std::vector<int> alpha(static_cast<std::size_t>(d), 0);
  detail::multi_index_step(alpha, 0, k, visit);
}

}  // namespace krrlab
