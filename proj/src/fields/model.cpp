// Copyright 2026 The movox Authors
// SPDX-License-Identifier: Apache-2.0

#include "movox/fields/model.hpp"

#include <cmath>
#include <cstdio>

#include "movox/diff/ops.hpp"
#include "movox/error.hpp"
#include "movox/fields/positional_encoding.hpp"
#include "movox/grids/sampling.hpp"

namespace movox::fields {

std::string_view to_string(Variant v) {
  switch (v) {
    case Variant::full: return "full";
    case Variant::no_decouple: return "no-decouple";
    case Variant::mlp_deform: return "mlp-deform";
  }
  return "?";
}

Variant parse_variant(std::string_view name) {
  if (name == "full") return Variant::full;
  if (name == "no-decouple" || name == "no_decouple") return Variant::no_decouple;
  if (name == "mlp-deform" || name == "mlp_deform") return Variant::mlp_deform;
  throw ContractError("unknown variant '" + std::string(name) + "' (expected full, no-decouple or mlp-deform)");
}

void ModelConfig::validate() const {
  if (expression_dims == 0) throw ContractError("model: expression_dims must be positive");
  if (hidden == 0 || deform_hidden == 0) throw ContractError("model: hidden widths must be positive");
  if (deform_layers < 2) throw ContractError("model: deform_layers must be at least 2");
  auto check = [&](const GridSpec& s) {
    const grids::GridGeometry g = geometry(s);
    g.validate();
    grids::validate_scale_count(g, scales);
  };
  if (variant == Variant::no_decouple) {
    check(no_decouple);
  } else {
    check(appearance);
    if (variant == Variant::full) check(motion);
  }
}

namespace {

nlohmann::json grid_json(const GridSpec& s) { return {{"channels", s.channels}, {"resolution", s.resolution}}; }

GridSpec grid_from(const nlohmann::json& j, GridSpec fallback) {
  fallback.channels = j.value("channels", fallback.channels);
  fallback.resolution = j.value("resolution", fallback.resolution);
  return fallback;
}

}  // namespace

nlohmann::json to_json(const ModelConfig& c) {
  return {{"variant", to_string(c.variant)},
          {"expression_dims", c.expression_dims},
          {"scales", c.scales},
          {"appearance", grid_json(c.appearance)},
          {"motion", grid_json(c.motion)},
          {"no_decouple", grid_json(c.no_decouple)},
          {"hidden", c.hidden},
          {"deform_hidden", c.deform_hidden},
          {"deform_layers", c.deform_layers},
          {"feature_frequencies", c.feature_frequencies},
          {"direction_frequencies", c.direction_frequencies},
          {"position_frequencies", c.position_frequencies},
          {"density_shift", c.density_shift},
          {"appearance_init", c.appearance_init},
          {"domain", {{"min", c.domain.min}, {"edge", c.domain.edge}}}};
}

ModelConfig model_config_from_json(const nlohmann::json& j) {
  ModelConfig c;
  if (j.contains("variant")) c.variant = parse_variant(j.at("variant").get<std::string>());
  c.expression_dims = j.value("expression_dims", c.expression_dims);
  c.scales = j.value("scales", c.scales);
  if (j.contains("appearance")) c.appearance = grid_from(j.at("appearance"), c.appearance);
  if (j.contains("motion")) c.motion = grid_from(j.at("motion"), c.motion);
  if (j.contains("no_decouple")) c.no_decouple = grid_from(j.at("no_decouple"), c.no_decouple);
  c.hidden = j.value("hidden", c.hidden);
  c.deform_hidden = j.value("deform_hidden", c.deform_hidden);
  c.deform_layers = j.value("deform_layers", c.deform_layers);
  c.feature_frequencies = j.value("feature_frequencies", c.feature_frequencies);
  c.direction_frequencies = j.value("direction_frequencies", c.direction_frequencies);
  c.position_frequencies = j.value("position_frequencies", c.position_frequencies);
  c.density_shift = j.value("density_shift", c.density_shift);
  c.appearance_init = j.value("appearance_init", c.appearance_init);
  if (j.contains("domain")) {
    const auto& d = j.at("domain");
    if (d.contains("min")) c.domain.min = d.at("min").get<std::array<double, 3>>();
    c.domain.edge = d.value("edge", c.domain.edge);
  }
  return c;
}

template <typename Real>
void SampleBatch<Real>::validate(std::size_t expression_dims) const {
  const std::size_t R = directions.rows();
  if (directions.cols() != 3 || points.cols() != 3 || samples_per_ray == 0 ||
      points.rows() != R * samples_per_ray || theta.rows() != R || theta.cols() != expression_dims) {
    throw ShapeError("sample batch: points " + diff::to_string(points.shape()) + ", directions " +
                     diff::to_string(directions.shape()) + ", theta " + diff::to_string(theta.shape()) +
                     ", samples_per_ray " + std::to_string(samples_per_ray) + ", N " +
                     std::to_string(expression_dims));
  }
}

namespace {

std::string indexed(const std::string& prefix, std::size_t i) {
  char buf[24];
  std::snprintf(buf, sizeof buf, "%02zu", i);
  return prefix + buf;
}

}  // namespace

template <typename Real>
AvatarModel<Real> AvatarModel<Real>::declare(const ModelConfig& config, ParamDeclarer<Real>& params) {
  config.validate();
  AvatarModel m;
  m.config_ = config;
  const std::size_t N = config.expression_dims, K = config.scales;
  const std::size_t ray_in = encoded_width(3, config.direction_frequencies) + N;
  const auto grids = diff::ParamGroup::grids;

  if (config.variant == Variant::no_decouple) {
    MotionField<Real> nd;
    nd.geometry = config.geometry(config.no_decouple);
    for (std::size_t i = 0; i < N; ++i) {
      nd.bases.push_back(params.declare(indexed("no_decouple.basis.", i), grids, nd.geometry.shape(),
                                        Init::uniform(config.appearance_init)));
    }
    const std::size_t in = encoded_width(N * K * nd.geometry.channels, config.feature_frequencies);
    nd.head = Mlp<Real>::declare(params, "no_decouple.head", {in, config.hidden, 4}, ray_in, false);
    m.no_decouple_ = std::move(nd);
    return m;
  }

  AppearanceField<Real> app;
  app.geometry = config.geometry(config.appearance);
  app.grid = params.declare("appearance.grid", grids, app.geometry.shape(), Init::uniform(config.appearance_init));
  const std::size_t in = encoded_width(K * app.geometry.channels, config.feature_frequencies);
  app.head = Mlp<Real>::declare(params, "appearance.head", {in, config.hidden, 4}, ray_in, false);
  m.appearance_ = std::move(app);

  if (config.variant == Variant::full) {
    MotionField<Real> motion;
    motion.geometry = config.geometry(config.motion);
    for (std::size_t i = 0; i < N; ++i) {
      motion.bases.push_back(params.declare(indexed("motion.basis.", i), grids, motion.geometry.shape(), Init::zero()));
    }
    motion.head = Mlp<Real>::declare(params, "motion.head", {K * N * motion.geometry.channels, config.hidden, 3}, 0,
                                     true);
    m.motion_ = std::move(motion);
  } else {
    std::vector<std::size_t> widths{encoded_width(3, config.position_frequencies)};
    for (std::size_t l = 0; l + 1 < config.deform_layers; ++l) widths.push_back(config.deform_hidden);
    widths.push_back(3);
    m.deform_mlp_ = Mlp<Real>::declare(params, "deform.head", widths, N, true);
  }
  return m;
}

template <typename Real>
AvatarModel<Real> AvatarModel<Real>::create(const ModelConfig& config, diff::ParamStore<Real>& store,
                                            std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  ParamDeclarer<Real> params(store, rng);
  return declare(config, params);
}

template <typename Real>
AvatarModel<Real> AvatarModel<Real>::bind(const ModelConfig& config, diff::ParamStore<Real>& store) {
  ParamDeclarer<Real> params(store);
  AvatarModel m = declare(config, params);
  if (store.size() != m.parameter_count()) {
    throw ContractError("checkpoint holds " + std::to_string(store.size()) + " parameters, variant '" +
                        std::string(to_string(config.variant)) + "' declares " + std::to_string(m.parameter_count()));
  }
  return m;
}

template <typename Real>
std::size_t AvatarModel<Real>::parameter_count() const {
  std::size_t n = 0;
  if (appearance_) n += 1 + appearance_->head.parameter_count();
  if (motion_) n += motion_->bases.size() + motion_->head.parameter_count();
  if (no_decouple_) n += no_decouple_->bases.size() + no_decouple_->head.parameter_count();
  if (deform_mlp_) n += deform_mlp_->parameter_count();
  return n;
}

template <typename Real>
diff::Var<Real> AvatarModel<Real>::ray_features(diff::Tape<Real>& tape, const SampleBatch<Real>& batch) const {
  const std::size_t R = batch.rays(), N = config_.expression_dims;
  const std::size_t pe = encoded_width(3, config_.direction_frequencies);
  diff::Buffer<Real> out = diff::Buffer<Real>::matrix(R, pe + N);
  for (std::size_t r = 0; r < R; ++r) {
    Real d[3] = {batch.directions.at(r, 0), batch.directions.at(r, 1), batch.directions.at(r, 2)};
    const Real n = std::sqrt(d[0] * d[0] + d[1] * d[1] + d[2] * d[2]);
    if (!(n > Real(0))) throw ContractError("ray " + std::to_string(r) + ": view direction has zero length");
    if (std::abs(n - Real(1)) > Real(1e-6)) {
      for (Real& v : d) v /= n;
    }
    const std::vector<Real> enc = positional_encoding<Real>(std::span<const Real>(d, 3), config_.direction_frequencies);
    Real* row = out.data() + r * (pe + N);
    std::copy(enc.begin(), enc.end(), row);
    for (std::size_t i = 0; i < N; ++i) row[pe + i] = batch.theta.at(r, i);
  }
  return tape.constant(std::move(out));
}

template <typename Real>
std::pair<diff::Var<Real>, diff::Var<Real>> AvatarModel<Real>::head_outputs(diff::Var<Real> raw) const {
  auto rgb = diff::sigmoid(diff::slice_cols(raw, 0, 3));
  auto sigma = diff::softplus(diff::slice_cols(raw, 3, 1), static_cast<Real>(-config_.density_shift));
  return {rgb, sigma};
}

template <typename Real>
diff::Var<Real> AvatarModel<Real>::deform(diff::Tape<Real>& tape, const diff::ParamStore<Real>& store,
                                          const SampleBatch<Real>& batch) const {
  batch.validate(config_.expression_dims);
  const std::size_t M = batch.samples_per_ray;
  auto points = tape.constant(batch.points);
  if (motion_) {
    std::vector<diff::Var<Real>> bases;
    bases.reserve(motion_->bases.size());
    for (diff::ParamId id : motion_->bases) bases.push_back(tape.parameter(store, id));
    auto vd = grids::sample_mvg<Real>(motion_->geometry, bases, batch.theta, M, points, config_.scales);
    return motion_->head.forward(tape, store, vd, std::nullopt, M);
  }
  if (deform_mlp_) {
    auto gx = encode(points, config_.position_frequencies);
    auto theta = tape.constant(batch.theta);
    return deform_mlp_->forward(tape, store, gx, theta, M);
  }
  throw ContractError("deform: variant '" + std::string(to_string(config_.variant)) + "' has no motion field");
}

template <typename Real>
std::pair<diff::Var<Real>, diff::Var<Real>> AvatarModel<Real>::query_canonical(diff::Tape<Real>& tape,
                                                                               const diff::ParamStore<Real>& store,
                                                                               diff::Var<Real> canonical_points,
                                                                               const SampleBatch<Real>& batch) const {
  if (!appearance_) {
    throw ContractError("query_canonical: variant '" + std::string(to_string(config_.variant)) +
                        "' has no canonical field");
  }
  batch.validate(config_.expression_dims);
  auto va = grids::sample_grid(appearance_->geometry, tape.parameter(store, appearance_->grid), canonical_points,
                               config_.scales);
  auto raw = appearance_->head.forward(tape, store, encode(va, config_.feature_frequencies),
                                       ray_features(tape, batch), batch.samples_per_ray);
  return head_outputs(raw);
}

template <typename Real>
FieldOutput<Real> AvatarModel<Real>::query(diff::Tape<Real>& tape, const diff::ParamStore<Real>& store,
                                           const SampleBatch<Real>& batch) const {
  batch.validate(config_.expression_dims);
  if (no_decouple_) {
    std::vector<diff::Var<Real>> bases;
    bases.reserve(no_decouple_->bases.size());
    for (diff::ParamId id : no_decouple_->bases) bases.push_back(tape.parameter(store, id));
    auto points = tape.constant(batch.points);
    auto feats = grids::sample_mvg<Real>(no_decouple_->geometry, bases, batch.theta, batch.samples_per_ray, points,
                                         config_.scales);
    auto raw = no_decouple_->head.forward(tape, store, encode(feats, config_.feature_frequencies),
                                          ray_features(tape, batch), batch.samples_per_ray);
    auto [rgb, sigma] = head_outputs(raw);
    return {rgb, sigma, std::nullopt};
  }
  auto offset = deform(tape, store, batch);
  auto warped = diff::add(tape.constant(batch.points), offset);
  auto [rgb, sigma] = query_canonical(tape, store, warped, batch);
  return {rgb, sigma, offset};
}

template struct SampleBatch<float>;
template struct SampleBatch<double>;
template class AvatarModel<float>;
template class AvatarModel<double>;

}  // namespace movox::fields
