#include "driftlab/training/config.hpp"

#include "driftlab/errors.hpp"

namespace driftlab::training {

std::string_view method_name(Method m) {
  switch (m) {
    case Method::kGumbel: return "gumbel";
    case Method::kS2P: return "s2p";
    case Method::kSIL: return "sil";
    case Method::kSSIL: return "ssil";
    case Method::kMixData: return "mixdata";
  }
  return "?";
}

Method parse_method(std::string_view name) {
  if (name == "gumbel") return Method::kGumbel;
  if (name == "s2p") return Method::kS2P;
  if (name == "sil") return Method::kSIL;
  if (name == "ssil") return Method::kSSIL;
  if (name == "mixdata") return Method::kMixData;
  throw ParameterError("unknown method '" + std::string(name) +
                       "' (expected gumbel, s2p, sil, ssil or mixdata)");
}

bool is_sil_family(Method m) {
  return m == Method::kSIL || m == Method::kSSIL || m == Method::kMixData;
}

void FinetuneConfig::validate() const {
  if (!(alpha >= 0.0)) throw ParameterError("alpha must be >= 0");
  if (!(tau > 0.0)) throw ParameterError("tau must be > 0");
  if (batch == 0) throw ParameterError("batch must be positive");
  if (total_steps < 0) throw ParameterError("total_steps must be >= 0");
  if (eval_interval <= 0) throw ParameterError("eval_interval must be positive");
  if (probe_interval <= 0) throw ParameterError("probe_interval must be positive");
  if (!(adam.lr > 0.0)) throw ParameterError("learning rate must be positive");
  if (!(beta >= 0.0 && beta <= 1.0)) throw ParameterError("beta must lie in [0, 1]");
  if (method != Method::kMixData && beta != 0.0) {
    throw ParameterError("beta only applies to mixdata");
  }
  if ((method == Method::kGumbel || method == Method::kSIL || method == Method::kMixData) &&
      alpha != 0.0) {
    throw ParameterError("alpha only applies to s2p and ssil");
  }
  if (is_sil_family(method)) {
    if (k1 <= 0) throw ParameterError("k1 must be positive");
    if (allow_zero_imitation) {
      if (k2 < 0 || k2_prime < 0) throw ParameterError("k2 and k2' must be >= 0");
    } else if (k2 <= 0 || k2_prime <= 0) {
      throw ParameterError("k2 and k2' must be positive");
    }
    if (teacher_dataset_size == 0) throw ParameterError("teacher_dataset_size must be positive");
  }
}

}  // namespace driftlab::training
