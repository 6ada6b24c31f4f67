#include "krrlab/target.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "krrlab/error.hpp"
#include "krrlab/multi_index.hpp"

namespace krrlab {

namespace {

const char* kind_name(TargetKind kind) {
  switch (kind) {
    case TargetKind::KernelSections: return "kernel_sections";
    case TargetKind::Eigenfunction: return "eigenfunction";
    case TargetKind::Coefficients: return "coefficients";
  }
  return "?";
}

int read_int(const nlohmann::json& j, const char* key, int fallback, int min_value) {
  if (!j.contains(key)) return fallback;
  const auto& v = j.at(key);
  if (!v.is_number_integer() || v.get<long long>() < min_value) {
    throw ConfigError(std::string("target.") + key,
                      std::string("target.") + key + " must be an integer >= " + std::to_string(min_value));
  }
  return v.get<int>();
}

}  // namespace

// --------------------------------------------------------------- TargetRequest

nlohmann::json TargetRequest::to_json() const {
  nlohmann::json j{{"kind", kind_name(kind)}};
  switch (kind) {
    case TargetKind::KernelSections: j["anchors"] = anchors; break;
    case TargetKind::Eigenfunction:
      j["level"] = level;
      j["index"] = index;
      break;
    case TargetKind::Coefficients: j["coefficients"] = coefficients; break;
  }
  return j;
}

TargetRequest TargetRequest::from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw ConfigError("target", "target must be a JSON object");
  if (!j.contains("kind") || !j.at("kind").is_string()) throw ConfigError("target.kind", "target.kind must be a string");
  const auto kind = j.at("kind").get<std::string>();
  TargetRequest req;
  if (kind == "kernel_sections") {
    req.kind = TargetKind::KernelSections;
    req.anchors = read_int(j, "anchors", 3, 1);
  } else if (kind == "eigenfunction") {
    req.kind = TargetKind::Eigenfunction;
    req.level = read_int(j, "level", 1, 0);
    req.index = read_int(j, "index", 0, 0);
  } else if (kind == "coefficients") {
    req.kind = TargetKind::Coefficients;
    if (!j.contains("coefficients") || !j.at("coefficients").is_array()) {
      throw ConfigError("target.coefficients", "coefficient targets need a per-level coefficients array");
    }
    try {
      req.coefficients = j.at("coefficients").get<std::vector<std::vector<double>>>();
    } catch (const nlohmann::json::exception&) {
      throw ConfigError("target.coefficients", "target.coefficients must be an array of number arrays");
    }
  } else {
    throw ConfigError("target.kind", "unknown target kind '" + kind +
                                         "' (expected kernel_sections, eigenfunction or coefficients)");
  }
  return req;
}

// ---------------------------------------------------------------- multi-index

std::vector<int> multi_index_at(int d, int level, long long index) {
  if (d < 1 || level < 0 || index < 0) throw std::out_of_range("invalid multi-index request");
  std::vector<int> found;
  long long pos = 0;
  for_each_multi_index(d, level, [&](const std::vector<int>& alpha) {
    if (pos++ == index) {
      found = alpha;
      return false;
    }
    return true;
  });
  if (found.empty()) throw std::out_of_range("level " + std::to_string(level) + " has fewer than " +
                                             std::to_string(index + 1) + " entries");
  return found;
}

double multi_index_eigenvalue(const ProductKernel& pk, const std::vector<int>& alpha) {
  if (static_cast<int>(alpha.size()) != pk.dim()) throw std::invalid_argument("multi-index length mismatch");
  double log_mu = 0.0;
  for (int i = 0; i < pk.dim(); ++i) {
    const auto& f = pk.factor(i);
    log_mu += std::log(f.eigenvalue_scale()) + alpha[static_cast<std::size_t>(i)] * std::log(f.decay());
  }
  return std::exp(log_mu);
}

// ------------------------------------------------------------------ TargetSpec

TargetSpec TargetSpec::kernel_sections(ProductKernel pk, RowMatrix anchors, std::uint64_t seed) {
  if (anchors.cols() != pk.dim() || anchors.rows() < 1) {
    throw std::invalid_argument("anchors must be a non-empty matrix with d columns");
  }
  TargetSpec t(std::move(pk));
  t.kind_ = TargetKind::KernelSections;
  t.anchors_ = std::move(anchors);
  t.seed_ = seed;
  return t;
}

TargetSpec TargetSpec::eigenfunction(ProductKernel pk, int level, int index) {
  const int d = pk.dim();
  TargetSpec t(std::move(pk));
  t.kind_ = TargetKind::Eigenfunction;
  t.alpha_ = multi_index_at(d, level, index);
  return t;
}

TargetSpec TargetSpec::coefficients(ProductKernel pk, std::vector<std::vector<double>> coeffs) {
  const int d = pk.dim();
  if (!coeffs.empty() && multiplicity(d, static_cast<int>(coeffs.size()) - 1).value() > kEnumerationBudget) {
    throw BudgetError("coefficient target level " + std::to_string(coeffs.size() - 1) +
                      " exceeds the exact-enumeration budget");
  }
  for (std::size_t k = 0; k < coeffs.size(); ++k) {
    const auto m = multiplicity(d, static_cast<int>(k));
    if (coeffs[k].size() != static_cast<std::size_t>(m.value())) {
      throw std::invalid_argument("coefficient level " + std::to_string(k) + " needs exactly " +
                                  std::to_string(*m.exact) + " entries");
    }
  }
  TargetSpec t(std::move(pk));
  t.kind_ = TargetKind::Coefficients;
  for (std::size_t k = 0; k < coeffs.size(); ++k) {
    std::size_t j = 0;
    for_each_multi_index(d, static_cast<int>(k), [&](const std::vector<int>& alpha) {
      t.basis_.push_back(alpha);
      t.coeffs_.push_back(coeffs[k][j++]);
      t.basis_eigenvalues_.push_back(multi_index_eigenvalue(t.pk_, alpha));
      return true;
    });
  }
  t.coeffs_by_level_ = std::move(coeffs);
  return t;
}

double TargetSpec::eigen_product(const double* x, const std::vector<int>& alpha) const {
  double value = 1.0;
  std::vector<double> buf;
  for (int i = 0; i < pk_.dim(); ++i) {
    const int k = alpha[static_cast<std::size_t>(i)];
    buf.resize(static_cast<std::size_t>(k) + 1);
    pk_.factor(i).eigenfunctions(k, x[i], buf);
    value *= buf[static_cast<std::size_t>(k)];
  }
  return value;
}

double TargetSpec::evaluate(std::span<const double> x) const {
  if (static_cast<int>(x.size()) != pk_.dim()) throw std::invalid_argument("target input length mismatch");
  switch (kind_) {
    case TargetKind::KernelSections: {
      double sum = 0.0;
      for (Eigen::Index a = 0; a < anchors_.rows(); ++a) {
        sum += pk_.evaluate(x, std::span<const double>(anchors_.row(a).data(), x.size()));
      }
      return sum;
    }
    case TargetKind::Eigenfunction: return eigen_product(x.data(), alpha_);
    case TargetKind::Coefficients: {
      int k_top = 0;
      for (const auto& alpha : basis_) k_top = std::max(k_top, *std::max_element(alpha.begin(), alpha.end()));
      // Per-coordinate eigenfunction tables, then one product per basis element.
      std::vector<std::vector<double>> table(static_cast<std::size_t>(pk_.dim()),
                                             std::vector<double>(static_cast<std::size_t>(k_top) + 1));
      for (int i = 0; i < pk_.dim(); ++i) pk_.factor(i).eigenfunctions(k_top, x[i], table[static_cast<std::size_t>(i)]);
      double sum = 0.0;
      for (std::size_t b = 0; b < basis_.size(); ++b) {
        double term = coeffs_[b];
        for (std::size_t i = 0; i < table.size(); ++i) term *= table[i][static_cast<std::size_t>(basis_[b][i])];
        sum += term;
      }
      return sum;
    }
  }
  return 0.0;
}

Vector TargetSpec::evaluate_rows(const RowMatrix& X) const {
  if (X.cols() != pk_.dim()) throw std::invalid_argument("target input width mismatch");
  Vector out(X.rows());
  for (Eigen::Index i = 0; i < X.rows(); ++i) {
    out(i) = evaluate(std::span<const double>(X.row(i).data(), static_cast<std::size_t>(X.cols())));
  }
  return out;
}

double TargetSpec::source_norm_squared(double s) const {
  switch (kind_) {
    case TargetKind::KernelSections: {
      if (s != 1.0) throw std::invalid_argument("kernel-section targets only report the RKHS (s = 1) norm");
      return pk_.gram(anchors_).sum();
    }
    case TargetKind::Eigenfunction: return std::pow(multi_index_eigenvalue(pk_, alpha_), -s);
    case TargetKind::Coefficients: {
      double sum = 0.0;
      for (std::size_t b = 0; b < basis_.size(); ++b) sum += std::pow(basis_eigenvalues_[b], -s) * coeffs_[b] * coeffs_[b];
      return sum;
    }
  }
  return 0.0;
}

CoefficientSpec TargetSpec::level_masses(const SpectrumModel& sp, double s) const {
  CoefficientSpec spec;
  spec.s = s;
  spec.masses.assign(sp.levels().size(), 0.0);
  if (kind_ == TargetKind::Eigenfunction) {
    int level = 0;
    for (int a : alpha_) level += a;
    if (level > sp.k_max()) throw std::invalid_argument("target level exceeds the spectrum's k_max");
    spec.masses[static_cast<std::size_t>(level)] = source_norm_squared(s);
  } else if (kind_ == TargetKind::Coefficients) {
    if (coeffs_by_level_.size() > sp.levels().size()) {
      throw std::invalid_argument("target has more levels than the spectrum");
    }
    std::size_t b = 0;
    for (std::size_t k = 0; k < coeffs_by_level_.size(); ++k) {
      for (std::size_t j = 0; j < coeffs_by_level_[k].size(); ++j, ++b) {
        spec.masses[k] += std::pow(basis_eigenvalues_[b], -s) * coeffs_[b] * coeffs_[b];
      }
    }
    if (sp.mode() == SpectrumMode::ExactEnumeration) {
      auto padded = coeffs_by_level_;
      padded.resize(sp.levels().size());
      for (std::size_t k = coeffs_by_level_.size(); k < padded.size(); ++k) {
        padded[k].assign(sp.levels()[k].eigenvalues.size(), 0.0);
      }
      spec.per_index = std::move(padded);
    }
  } else {
    throw std::invalid_argument("level masses are only defined for eigenfunction and coefficient targets");
  }
  spec.norm_budget = std::sqrt(spec.source_norm_squared()) * (1.0 + 1e-12);
  if (spec.norm_budget == 0.0) spec.norm_budget = 1.0;
  return spec;
}

nlohmann::json TargetSpec::to_json() const {
  nlohmann::json j{{"kind", kind_name(kind_)}};
  switch (kind_) {
    case TargetKind::KernelSections: {
      nlohmann::json rows = nlohmann::json::array();
      for (Eigen::Index a = 0; a < anchors_.rows(); ++a) {
        rows.push_back(std::vector<double>(anchors_.row(a).data(), anchors_.row(a).data() + anchors_.cols()));
      }
      j["anchors"] = std::move(rows);
      j["seed"] = seed_;
      break;
    }
    case TargetKind::Eigenfunction: {
      nlohmann::json nonzero = nlohmann::json::object();
      for (std::size_t i = 0; i < alpha_.size(); ++i) {
        if (alpha_[i] != 0) nonzero[std::to_string(i)] = alpha_[i];
      }
      j["multi_index"] = std::move(nonzero);
      break;
    }
    case TargetKind::Coefficients: j["coefficients"] = coeffs_by_level_; break;
  }
  return j;
}

TargetSpec make_target(const ProductKernel& pk, const TargetRequest& request, Rng& rng, std::uint64_t seed) {
  switch (request.kind) {
    case TargetKind::KernelSections:
      if (request.anchors < 1) throw ConfigError("target.anchors", "target.anchors must be >= 1");
      return TargetSpec::kernel_sections(pk, pk.sample(rng, request.anchors), seed);
    case TargetKind::Eigenfunction: return TargetSpec::eigenfunction(pk, request.level, request.index);
    case TargetKind::Coefficients: return TargetSpec::coefficients(pk, request.coefficients);
  }
  throw std::logic_error("unhandled target kind");
}

}  // namespace krrlab
