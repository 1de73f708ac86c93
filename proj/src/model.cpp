#include "mbda/model.hpp"

#include "mbda/error.hpp"

#include <cmath>

namespace mbda {

std::string_view to_string(ModelKind m) { return m == ModelKind::DM ? "dm" : "zinb"; }

ModelKind parse_model_kind(std::string_view name) {
  if (name == "dm") return ModelKind::DM;
  if (name == "zinb") return ModelKind::ZINB;
  throw Error(ErrorKind::InvalidArgument, "unknown model '" + std::string(name) + "'");
}

void ModelHyper::validate(int num_groups) const {
  top.validate(num_groups);
  auto positive = [](double v, const char *name) {
    if (!(v > 0.0) || !std::isfinite(v))
      throw Error(ErrorKind::InvalidParameter, std::string(name) + " must be positive");
  };
  positive(bottom.a_pi, "a_pi");
  positive(bottom.b_pi, "b_pi");
  positive(bottom.a_phi, "a_phi");
  positive(bottom.b_phi, "b_phi");
  positive(dpp.sigma_s, "sigma_s");
  positive(dpp.tau_nu, "tau_nu");
  positive(dpp.a_t, "a_t");
  positive(dpp.b_t, "b_t");
  positive(dpp.a_m, "a_m");
  positive(dpp.b_m, "b_m");
  positive(prior.a_omega, "a_omega");
  positive(prior.b_omega, "b_omega");
  positive(scales.tau_phi, "tau_phi");
  positive(scales.tau_s, "tau_s");
  positive(scales.tau_alpha, "tau_alpha");
  positive(scales.tau_scale, "tau_scale");
  if (dpp.components < 0) throw Error(ErrorKind::InvalidParameter, "components must be >= 0");
  if (!std::isfinite(dpp.c_s) || !std::isfinite(prior.d) || !std::isfinite(prior.f))
    throw Error(ErrorKind::InvalidParameter, "c_s, d and f must be finite");
  if (gamma_repeats < 1) throw Error(ErrorKind::InvalidParameter, "gamma_repeats must be >= 1");
  if (scale_repeats < 0) throw Error(ErrorKind::InvalidParameter, "scale_repeats must be >= 0");
}

std::size_t ModelData::total_taxa() const {
  std::size_t total = 0;
  for (const auto &lv : levels) total += lv.p();
  return total;
}

ModelData ModelData::build(const std::vector<LevelTable> &levels, GroupLabels labels,
                           NormMethod normalization) {
  if (levels.empty()) throw Error(ErrorKind::InvalidArgument, "no levels to analyse");
  const CountTable &bottom = levels.front().table;
  if (bottom.n() != labels.n())
    throw Error(ErrorKind::InvalidArgument, "labels do not match the number of samples");

  ModelData data{std::move(labels), bottom.sample_ids(), {}, normalization, {}};
  data.levels.resize(levels.size());
  for (std::size_t l = 0; l < levels.size(); ++l) {
    const CountTable &t = levels[l].table;
    LevelData &lv = data.levels[l];
    lv.y = Matrix<double>(t.n(), t.p());
    for (std::size_t i = 0; i < t.n(); ++i)
      for (std::size_t j = 0; j < t.p(); ++j) lv.y(i, j) = static_cast<double>(t(i, j));
    lv.taxon_ids = t.taxon_ids();
    lv.row_totals = t.row_totals();
    lv.parent = levels[l].parent;
    lv.bottom_descendants = levels[l].bottom_descendants;
    if (lv.parent.size() != t.p()) lv.parent.assign(t.p(), -1);
    if (lv.bottom_descendants.size() != t.p()) {
      lv.bottom_descendants.assign(t.p(), {});
      if (l == 0)
        for (std::size_t j = 0; j < t.p(); ++j) lv.bottom_descendants[j] = {j};
    }
  }
  for (std::size_t l = 1; l < data.levels.size(); ++l) {
    auto &up = data.levels[l];
    up.children.assign(up.p(), {});
    const auto &down = data.levels[l - 1];
    for (std::size_t j = 0; j < down.p(); ++j) {
      const int par = down.parent[j];
      if (par < 0 || static_cast<std::size_t>(par) >= up.p())
        throw Error(ErrorKind::TreeMismatch, "taxon '" + down.taxon_ids[j] + "' has no parent");
      up.children[static_cast<std::size_t>(par)].push_back(j);
    }
  }
  data.levels.front().children.assign(data.levels.front().p(), {});

  if (normalization != NormMethod::DPP)
    data.fixed_s = estimate_size_factors(bottom, normalization).s;
  return data;
}

}  // namespace mbda
