#include "ctrlattack/attack.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "ctrlattack/objectives.hpp"
#include "rng.hpp"

namespace ctrlattack {

AblationMode parse_ablation_mode(const std::string& name) {
  if (name == "full") return AblationMode::full;
  if (name == "no_temporal_coupling" || name == "no_tc") return AblationMode::no_temporal_coupling;
  if (name == "no_temporal_integration" || name == "no_ti") return AblationMode::no_temporal_integration;
  throw InvalidArgument("unknown ablation mode '" + name + "'");
}

std::string to_string(AblationMode mode) {
  switch (mode) {
    case AblationMode::full: return "full";
    case AblationMode::no_temporal_coupling: return "no_temporal_coupling";
    case AblationMode::no_temporal_integration: return "no_temporal_integration";
  }
  return "unknown";
}

void WhiteBoxConfig::validate(std::size_t frame_count) const {
  if (k < 1 || k > frame_count) {
    throw InvalidArgument("white-box k must satisfy 1 <= k <= T (k=" + std::to_string(k) +
                          ", T=" + std::to_string(frame_count) + ")");
  }
  if (d < 1 || s < 1) throw InvalidArgument("white-box d and s must be >= 1");
  if (!(step_size > 0.0)) throw InvalidArgument("white-box step_size must be > 0");
  if (!(eps_max >= 0.0)) throw InvalidArgument("white-box eps_max must be >= 0");
}

void BlackBoxConfig::validate(std::size_t frame_count) const {
  if (population < 2) throw InvalidArgument("NES population must be >= 2");
  if (antithetic && population % 2 != 0) throw InvalidArgument("antithetic NES needs an even population");
  if (!(sigma > 0.0)) throw InvalidArgument("NES sigma must be > 0");
  if (!(step > 0.0)) throw InvalidArgument("NES step must be > 0");
  if (query_budget < population) {
    throw InvalidArgument("query budget " + std::to_string(query_budget) + " is smaller than the population " +
                          std::to_string(population));
  }
  if (k < 1 || k > frame_count) {
    throw InvalidArgument("black-box k must satisfy 1 <= k <= T (k=" + std::to_string(k) +
                          ", T=" + std::to_string(frame_count) + ")");
  }
  if (!(eps_max >= 0.0)) throw InvalidArgument("black-box eps_max must be >= 0");
}

// ---------------------------------------------------------------------------

ControlParameterization::ControlParameterization(AblationMode mode, std::size_t frame_count,
                                                 std::size_t mode_count, std::size_t axes)
    : mode_(mode), frame_count_(frame_count), axes_(axes) {
  if (axes < 1) throw InvalidArgument("parameterization needs at least one axis");
  if (mode != AblationMode::no_temporal_coupling) basis_.emplace(frame_count, mode_count);
}

std::size_t ControlParameterization::parameter_count() const {
  return basis_ ? axes_ * basis_->mode_count() : axes_ * frame_count_;
}

Matrix ControlParameterization::codes(std::span<const double> theta) const {
  if (theta.size() != parameter_count()) {
    throw ShapeError("theta has " + std::to_string(theta.size()) + " entries, expected " +
                     std::to_string(parameter_count()));
  }
  Matrix out(frame_count_, axes_);
  if (!basis_) {
    std::copy(theta.begin(), theta.end(), out.data().begin());
    return out;
  }
  const std::size_t k = basis_->mode_count();
  for (std::size_t t = 0; t < frame_count_; ++t) {
    for (std::size_t i = 0; i < axes_; ++i) {
      double acc = 0.0;
      for (std::size_t j = 0; j < k; ++j) acc += theta[i * k + j] * (*basis_)(t, j);
      out(t, i) = acc;
    }
  }
  return out;
}

std::vector<double> ControlParameterization::codes_adjoint(const Matrix& code_grad) const {
  if (code_grad.rows() != frame_count_ || code_grad.cols() != axes_) throw ShapeError("code gradient shape");
  if (!basis_) return {code_grad.data().begin(), code_grad.data().end()};
  const std::size_t k = basis_->mode_count();
  std::vector<double> out(axes_ * k, 0.0);
  for (std::size_t i = 0; i < axes_; ++i) {
    for (std::size_t j = 0; j < k; ++j) {
      double acc = 0.0;
      for (std::size_t t = 0; t < frame_count_; ++t) acc += code_grad(t, i) * (*basis_)(t, j);
      out[i * k + j] = acc;
    }
  }
  return out;
}

DisplacementTrack ControlParameterization::displacements(std::span<const double> theta) const {
  Matrix c = codes(theta);
  if (integrates()) return integrate(VelocityTrack(std::move(c)));
  return DisplacementTrack(std::move(c));
}

std::vector<double> ControlParameterization::displacements_adjoint(const Matrix& displacement_grad) const {
  if (!integrates()) return codes_adjoint(displacement_grad);
  // Adjoint of a cumulative sum is a reverse cumulative sum.
  Matrix g = displacement_grad;
  for (std::size_t t = frame_count_ - 1; t-- > 0;) {
    for (std::size_t i = 0; i < axes_; ++i) g(t, i) += g(t + 1, i);
  }
  return codes_adjoint(g);
}

ControlCoefficients ControlParameterization::as_coefficients(std::span<const double> theta) const {
  if (theta.size() != parameter_count()) throw ShapeError("theta size mismatch");
  if (basis_) {
    const std::size_t k = basis_->mode_count();
    Matrix a(axes_, k);
    std::copy(theta.begin(), theta.end(), a.data().begin());
    return ControlCoefficients(std::move(a));
  }
  Matrix a(axes_, frame_count_);
  for (std::size_t t = 0; t < frame_count_; ++t) {
    for (std::size_t i = 0; i < axes_; ++i) a(i, t) = theta[t * axes_ + i];
  }
  return ControlCoefficients(std::move(a));
}

// ---------------------------------------------------------------------------
// NES

NesStep nes_step(std::span<const double> theta, const ObjectiveOracle& evaluate, const BlackBoxConfig& cfg,
                 std::mt19937_64& rng) {
  const std::size_t m = cfg.population;
  const std::size_t dim = theta.size();
  if (m < 2 || (cfg.antithetic && m % 2 != 0)) throw InvalidArgument("invalid NES population");

  std::normal_distribution<double> normal(0.0, 1.0);
  std::vector<std::vector<double>> noise(m, std::vector<double>(dim));
  const std::size_t drawn = cfg.antithetic ? m / 2 : m;
  for (std::size_t j = 0; j < drawn; ++j) {
    for (double& e : noise[j]) e = normal(rng);
  }
  if (cfg.antithetic) {
    for (std::size_t j = 0; j < drawn; ++j) {
      for (std::size_t i = 0; i < dim; ++i) noise[j + drawn][i] = -noise[j][i];
    }
  }

  NesStep step;
  step.candidates.resize(m, std::vector<double>(dim));
  step.values.resize(m);
  for (std::size_t j = 0; j < m; ++j) {
    for (std::size_t i = 0; i < dim; ++i) step.candidates[j][i] = theta[i] + cfg.sigma * noise[j][i];
    try {
      step.values[j] = evaluate(step.candidates[j]);
    } catch (const CandidateError&) {
      throw;
    } catch (const std::exception& e) {
      throw CandidateError(j, e.what());
    }
    ++step.evaluations;
  }

  const double mean = std::accumulate(step.values.begin(), step.values.end(), 0.0) / static_cast<double>(m);
  double var = 0.0;
  for (double v : step.values) var += (v - mean) * (v - mean);
  const double sd = std::sqrt(var / static_cast<double>(m));

  step.theta.assign(theta.begin(), theta.end());
  step.direction.assign(dim, 0.0);
  if (!(sd >= 1e-12)) return step;

  const double scale = 1.0 / (static_cast<double>(m) * cfg.sigma);
  for (std::size_t j = 0; j < m; ++j) {
    const double z = (step.values[j] - mean) / sd;
    for (std::size_t i = 0; i < dim; ++i) step.direction[i] += scale * z * noise[j][i];
  }
  for (std::size_t i = 0; i < dim; ++i) step.theta[i] += cfg.step * step.direction[i];
  return step;
}

namespace {

double max_abs(const Matrix& m) {
  double mx = 0.0;
  for (double v : m.data()) mx = std::max(mx, std::abs(v));
  return mx;
}

// Scale theta so that `peak` (a positively homogeneous function of theta)
// does not exceed eps.
void rescale_to_budget(std::vector<double>& theta, double peak, double eps) {
  if (peak <= eps) return;
  const double factor = eps / peak;
  for (double& v : theta) v *= factor;
}

}  // namespace

AttackResult blackbox_attack(const VictimQuery& query, const TrajectoryCondition& traj, const BlackBoxConfig& cfg,
                             AblationMode mode) {
  const std::size_t frames = traj.frame_count();
  cfg.validate(frames);
  const ControlParameterization param(mode, frames, cfg.k, 2);
  const VelocityTrack reference = reference_velocities(traj);
  const PerturbationBudget budget(cfg.eps_max);

  auto project = [&](std::span<const double> candidate) {
    std::vector<double> theta(candidate.begin(), candidate.end());
    rescale_to_budget(theta, max_abs(param.displacements(theta).values()), cfg.eps_max);
    return theta;
  };

  AttackResult result;
  std::vector<double> theta(param.parameter_count(), 0.0);
  std::vector<double> best_theta = theta;
  double best = -std::numeric_limits<double>::infinity();
  std::size_t queries = 0;

  auto evaluate = [&](std::span<const double> candidate) {
    std::vector<double> projected = project(candidate);
    DisplacementTrack u = param.displacements(projected);
    TrajectoryCondition perturbed = apply_delta(traj, u, budget);
    ++queries;
    const ObservedTracks tracks = query(perturbed);
    const double j = objmc_objective(estimate_motion(tracks), reference);
    if (j > best) {
      best = j;
      best_theta = std::move(projected);
      result.best_displacements = std::move(u);
      result.perturbed_trajectory = std::move(perturbed);
    }
    return j;
  };

  std::mt19937_64 rng = detail::make_rng(cfg.seed, 0);
  while (queries + cfg.population <= cfg.query_budget) {
    try {
      const NesStep step = nes_step(theta, evaluate, cfg, rng);
      theta = project(step.theta);
    } catch (const CandidateError& e) {
      result.incomplete = true;
      result.incomplete_reason = e.what();
      break;
    }
    result.objective_history.push_back(best);
  }

  if (!result.perturbed_trajectory) {
    // Nothing was evaluated successfully; report the unperturbed condition.
    result.perturbed_trajectory = traj;
    result.best_displacements = DisplacementTrack(frames, 2);
    best = 0.0;
  }
  result.best_objective = best;
  result.best_coefficients = param.as_coefficients(best_theta);
  result.queries_used = queries;
  return result;
}

// ---------------------------------------------------------------------------
// White-box

WhiteBoxChain make_whitebox_chain(const WhiteBoxConfig& cfg, AblationMode mode, std::size_t frame_count,
                                  std::size_t roi_height, std::size_t roi_width) {
  return WhiteBoxChain{build_projection(cfg.d, cfg.s, cfg.seed),
                       ControlParameterization(mode, frame_count, cfg.k, cfg.d), roi_height, roi_width};
}

std::vector<DisplacementField> WhiteBoxChain::fields(std::span<const double> theta) const {
  const Matrix codes = parameterization.codes(theta);
  const std::size_t frames = codes.rows();
  std::vector<DisplacementField> out;
  out.reserve(frames);
  CoarseVelocityField accumulated;
  for (std::size_t t = 0; t < frames; ++t) {
    CoarseVelocityField v = project_code(codes.row(t), projection);
    if (parameterization.integrates()) {
      if (t == 0) {
        accumulated = std::move(v);
      } else {
        auto dst = accumulated.values();
        auto src = v.values();
        for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += src[i];
      }
      out.push_back(upsample_to_roi(accumulated, roi_height, roi_width));
    } else {
      out.push_back(upsample_to_roi(v, roi_height, roi_width));
    }
  }
  return out;
}

std::vector<double> WhiteBoxChain::pullback(const std::vector<DisplacementField>& field_grads) const {
  const std::size_t frames = field_grads.size();
  const std::size_t s = projection.grid_side();
  std::vector<CoarseVelocityField> coarse;
  coarse.reserve(frames);
  for (const DisplacementField& g : field_grads) coarse.push_back(upsample_to_roi_adjoint(g, s, s));
  if (parameterization.integrates()) {
    for (std::size_t t = frames - 1; t-- > 0;) {
      auto dst = coarse[t].values();
      auto src = coarse[t + 1].values();
      for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += src[i];
    }
  }
  Matrix code_grad(frames, projection.code_dim());
  for (std::size_t t = 0; t < frames; ++t) {
    const auto g = project_code_adjoint(coarse[t], projection);
    std::copy(g.begin(), g.end(), code_grad.row(t).begin());
  }
  return parameterization.codes_adjoint(code_grad);
}

WhiteBoxEvaluation evaluate_whitebox(const WhiteBoxVictim& victim, const WhiteBoxChain& chain,
                                     const std::vector<Vec2>& offsets, std::span<const double> theta,
                                     bool with_gradient) {
  const TrajectoryCondition& traj = victim.trajectory();
  const auto fields = chain.fields(theta);
  const auto positions = victim.positions(offsets, fields);
  const MotionEstimate est = estimate_motion(positions);
  const VelocityTrack reference = reference_velocities(traj);

  WhiteBoxEvaluation out;
  out.objective = objmc_objective(est, reference);
  out.mean_displacements.reserve(fields.size());
  for (const auto& f : fields) out.mean_displacements.push_back(f.mean());
  if (!with_gradient) return out;

  const std::size_t frames = positions.size();
  const double inv = 1.0 / static_cast<double>(frames - 1);
  std::vector<Vec2> dpos(frames);
  for (std::size_t t = 0; t + 1 < frames; ++t) {
    const Vec2 diff = est.velocities.vec2(t) - reference.vec2(t);
    const double n = diff.norm();
    if (n < 1e-12) continue;
    const Vec2 g = (inv / n) * diff;
    dpos[t + 1] += g;
    dpos[t] -= g;
  }

  const auto jac = victim.position_jacobians(offsets, fields);
  std::vector<DisplacementField> field_grads;
  field_grads.reserve(frames);
  for (std::size_t t = 0; t < frames; ++t) {
    DisplacementField g(jac[t].height, jac[t].width);
    for (std::size_t r = 0; r < jac[t].height; ++r) {
      for (std::size_t c = 0; c < jac[t].width; ++c) g(r, c) = jac[t](r, c).apply_transpose(dpos[t]);
    }
    field_grads.push_back(std::move(g));
  }
  out.gradient = chain.pullback(field_grads);
  return out;
}

namespace {

double peak_mean_displacement(const std::vector<Vec2>& means) {
  double mx = 0.0;
  for (const Vec2& m : means) mx = std::max({mx, std::abs(m.x), std::abs(m.y)});
  return mx;
}

}  // namespace

AttackResult whitebox_attack(WhiteBoxVictim& victim, const WhiteBoxConfig& cfg, AblationMode mode) {
  const TrajectoryCondition& traj = victim.trajectory();
  const std::size_t frames = traj.frame_count();
  cfg.validate(frames);

  AttackResult result;
  // Stage 1: internal offsets with controls frozen at zero.
  result.internal_offsets = victim.align(cfg.stage1_iterations);
  const auto& offsets = result.internal_offsets;

  // Stage 2: offsets frozen, normalized gradient ascent on the coefficients.
  const WhiteBoxChain chain = make_whitebox_chain(cfg, mode, frames, victim.roi_height(), victim.roi_width());
  std::vector<double> theta(chain.parameterization.parameter_count(), 0.0);
  WhiteBoxEvaluation current = evaluate_whitebox(victim, chain, offsets, theta);
  std::size_t evaluations = 1;
  double best = current.objective;
  std::vector<double> best_theta = theta;
  result.objective_history.push_back(best);

  std::mt19937_64 rng = detail::make_rng(cfg.seed, 1);
  std::normal_distribution<double> normal(0.0, 1.0);
  for (std::size_t it = 1; it <= cfg.iterations; ++it) {
    std::vector<double> direction = current.gradient;
    double norm = 0.0;
    for (double g : direction) {
      if (!std::isfinite(g)) throw NonFiniteGradient(static_cast<int>(it));
      norm += g * g;
    }
    norm = std::sqrt(norm);
    if (norm < 1e-12) {
      // The objective is not differentiable where every frame matches the
      // reference exactly; leave that point along a seeded random direction.
      norm = 0.0;
      for (double& g : direction) {
        g = normal(rng);
        norm += g * g;
      }
      norm = std::sqrt(norm);
    }
    for (std::size_t i = 0; i < theta.size(); ++i) theta[i] += cfg.step_size * direction[i] / norm;

    current = evaluate_whitebox(victim, chain, offsets, theta, false);
    const double peak = peak_mean_displacement(current.mean_displacements);
    if (peak > cfg.eps_max) rescale_to_budget(theta, peak, cfg.eps_max);
    current = evaluate_whitebox(victim, chain, offsets, theta);
    ++evaluations;
    if (current.objective > best) {
      best = current.objective;
      best_theta = theta;
    }
    result.objective_history.push_back(best);
  }

  result.best_objective = best;
  result.best_coefficients = chain.parameterization.as_coefficients(best_theta);
  result.displacement_fields = chain.fields(best_theta);
  result.best_displacements = chain.parameterization.displacements(best_theta);
  result.queries_used = evaluations;
  return result;
}

}  // namespace ctrlattack
