#include "hnav/mpc.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "hnav/qp.hpp"
#include "json.hpp"

namespace hnav {

void SafetyMargins::validate() const {
  if (!(d_0 >= 0.0) || !(d_coop >= 0.0) || !(d_noncoop >= d_coop))
    throw std::invalid_argument("SafetyMargins: need d_0 >= 0 and d_noncoop >= d_coop >= 0");
  if (!(gamma > 0.0 && gamma <= 1.0)) throw std::invalid_argument("SafetyMargins: gamma must be in (0, 1]");
}

void MpcWeights::validate() const {
  if (!(sigma_noncoop > sigma_coop) || !(sigma_coop > 0.0))
    throw std::invalid_argument("MpcWeights: need sigma_noncoop > sigma_coop > 0");
  if (Eigen::SelfAdjointEigenSolver<Eigen::Matrix2d>(R).eigenvalues().minCoeff() <= 0.0)
    throw std::invalid_argument("MpcWeights: R must be positive definite");
  if (Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d>(Q).eigenvalues().minCoeff() < 0.0 ||
      Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d>(Q_f).eigenvalues().minCoeff() < 0.0)
    throw std::invalid_argument("MpcWeights: Q and Q_f must be positive semidefinite");
  if (!(rho_s > 0.0) || !(rho_s_lin >= 0.0) || !(eta >= 0.0))
    throw std::invalid_argument("MpcWeights: invalid penalty or social scale");
}

MpcSettings MpcSettings::from_sim(const SimConfig& config) {
  MpcSettings s;
  s.dt = config.dt;
  s.v_min = config.v_min;
  s.v_max = config.v_max;
  s.w_max = config.w_max;
  s.robot_radius = config.robot_radius;
  s.arena_half_extent = config.arena_spawn_radius + 1.0;
  return s;
}

const char* mpc_status_name(MpcStatus s) {
  switch (s) {
    case MpcStatus::Optimal: return "optimal";
    case MpcStatus::SlackActive: return "slack_active";
    case MpcStatus::Degraded: return "degraded";
  }
  return "unknown";
}

std::vector<Vec2> project_pedestrian(const Vec2& position, const Vec2& velocity, int h, double dt) {
  std::vector<Vec2> out;
  for (int k = 1; k <= h; ++k) out.push_back(position + static_cast<double>(k) * dt * velocity);
  return out;
}

double barrier_value(const Vec2& p_r, const Vec2& p_i, double r_r, double r_i, int coop_label,
                     const SafetyMargins& margins) {
  return (p_r - p_i).norm() - (r_r + r_i + margins.d_safety(coop_label));
}

double social_cost(const Vec2& p_r, const Vec2& p_i, double coop_prob, const MpcWeights& w) {
  const double d2 = (p_r - p_i).squaredNorm();
  return coop_prob * w.eta * std::exp(-d2 / (w.sigma_coop * w.sigma_coop)) +
         (1.0 - coop_prob) * w.eta * std::exp(-d2 / (w.sigma_noncoop * w.sigma_noncoop));
}

std::vector<MpcPedestrian> mpc_pedestrians(const RobotState& robot,
                                           const std::vector<PedestrianObservation>& obs,
                                           double ped_radius) {
  std::vector<MpcPedestrian> peds;
  for (const auto& o : obs) {
    MpcPedestrian p;
    p.id = o.ped_id;
    p.position = robot.position + rotate<double>(o.rel_position, robot.heading);
    p.velocity = robot.velocity + rotate<double>(o.rel_velocity, robot.heading);
    p.radius = ped_radius;
    p.coop_prob = o.coop_prob;
    p.coop_label = o.coop_label;
    peds.push_back(p);
  }
  return peds;
}

MpcProblem build_mpc(const RobotState& robot, const std::vector<MpcPedestrian>& peds, int h,
                     const SafetyMargins& margins, const MpcWeights& weights,
                     const MpcSettings& settings) {
  if (h < 1) throw std::invalid_argument("build_mpc: horizon must be >= 1");
  margins.validate();
  weights.validate();
  MpcProblem p;
  p.x0 = Vec3(robot.position.x(), robot.position.y(), robot.heading);
  p.goal = robot.goal;
  const Vec2 to_goal = robot.goal - robot.position;
  p.goal_heading = to_goal.norm() > 1e-9 ? std::atan2(to_goal.y(), to_goal.x()) : robot.heading;
  p.h = h;
  p.peds = peds;
  p.margins = margins;
  p.weights = weights;
  p.settings = settings;
  for (const auto& ped : peds) {
    std::vector<Vec2> traj{ped.position};
    for (const Vec2& q : project_pedestrian(ped.position, ped.velocity, h, settings.dt)) traj.push_back(q);
    p.predicted.push_back(std::move(traj));
  }
  return p;
}

std::vector<Vec3> rollout_unicycle(const Vec3& x0, const std::vector<Control>& controls, double dt) {
  std::vector<Vec3> xs{x0};
  for (const Control& u : controls) {
    const Vec3& x = xs.back();
    xs.emplace_back(x.x() + dt * u.v * std::cos(x.z()), x.y() + dt * u.v * std::sin(x.z()),
                    wrap_angle(x.z() + dt * u.w));
  }
  return xs;
}

namespace {

Vec3 tracking_error(const MpcProblem& p, const Vec3& x) {
  return {x.x() - p.goal.x(), x.y() - p.goal.y(), wrap_angle(x.z() - p.goal_heading)};
}

double cost_of(const MpcProblem& p, const std::vector<Vec3>& xs, const std::vector<Control>& u) {
  double cost = 0.0;
  for (int k = 0; k < p.h; ++k) {
    const Vec3 e = tracking_error(p, xs[static_cast<std::size_t>(k)]);
    const Eigen::Vector2d uk(u[static_cast<std::size_t>(k)].v, u[static_cast<std::size_t>(k)].w);
    cost += e.dot(p.weights.Q * e) + uk.dot(p.weights.R * uk);
    const Vec2 pr = xs[static_cast<std::size_t>(k)].head<2>();
    for (std::size_t i = 0; i < p.peds.size(); ++i)
      cost += social_cost(pr, p.predicted[i][static_cast<std::size_t>(k)], p.peds[i].coop_prob, p.weights);
  }
  const Vec3 e = tracking_error(p, xs.back());
  return cost + e.dot(p.weights.Q_f * e);
}

double barrier_at(const MpcProblem& p, std::size_t i, const Vec3& x, int k) {
  return barrier_value(x.head<2>(), p.predicted[i][static_cast<std::size_t>(k)], p.settings.robot_radius,
                       p.peds[i].radius, p.peds[i].coop_label, p.margins);
}

Mat residuals_of(const MpcProblem& p, const std::vector<Vec3>& xs) {
  Mat r(static_cast<Eigen::Index>(p.peds.size()), p.h);
  for (std::size_t i = 0; i < p.peds.size(); ++i) {
    for (int k = 0; k < p.h; ++k) {
      r(static_cast<Eigen::Index>(i), k) =
          barrier_at(p, i, xs[static_cast<std::size_t>(k + 1)], k + 1) -
          (1.0 - p.margins.gamma) * barrier_at(p, i, xs[static_cast<std::size_t>(k)], k);
    }
  }
  return r;
}

double box_violation(const MpcProblem& p, const std::vector<Vec3>& xs) {
  double total = 0.0;
  for (std::size_t k = 1; k < xs.size(); ++k) {
    for (int a = 0; a < 2; ++a) {
      const double v = std::max(0.0, std::abs(xs[k](a)) - p.settings.arena_half_extent);
      total += p.weights.rho_s * v * v + p.weights.rho_s_lin * v;
    }
  }
  return total;
}

double merit_of(const MpcProblem& p, const std::vector<Vec3>& xs, const std::vector<Control>& u) {
  double penalty = box_violation(p, xs);
  const Mat r = residuals_of(p, xs);
  for (Eigen::Index i = 0; i < r.size(); ++i) {
    const double s = std::max(0.0, -r(i));
    penalty += p.weights.rho_s * s * s + p.weights.rho_s_lin * s;
  }
  return cost_of(p, xs, u) + penalty;
}

std::vector<Control> clamp_all(const MpcSettings& s, std::vector<Control> u) {
  for (auto& c : u) {
    c.v = std::clamp(c.v, s.v_min, s.v_max);
    c.w = std::clamp(c.w, -s.w_max, s.w_max);
  }
  return u;
}

std::vector<Control> goal_heuristic(const MpcProblem& p) {
  std::vector<Control> u;
  Vec3 x = p.x0;
  const double dt = p.settings.dt;
  for (int k = 0; k < p.h; ++k) {
    const Vec2 d = p.goal - x.head<2>();
    const double dist = d.norm();
    const double err = dist > 1e-9 ? wrap_angle(std::atan2(d.y(), d.x()) - x.z()) : 0.0;
    Control c;
    c.w = std::clamp(err / dt, -p.settings.w_max, p.settings.w_max);
    c.v = std::clamp(std::max(0.0, std::cos(err)) * std::min(p.settings.v_max, dist / dt),
                     p.settings.v_min, p.settings.v_max);
    u.push_back(c);
    x = rollout_unicycle(x, {c}, dt).back();
  }
  return u;
}

// Rows of the linearized constraint set that can ever become active.
struct RowSpec {
  enum Kind { Barrier, Box } kind;
  int i;     // pedestrian (Barrier) or axis (Box)
  int k;     // step: Barrier row k couples x_k and x_{k+1}; Box row constrains x_k
  double sign = 1.0;
};

std::vector<RowSpec> relevant_rows(const MpcProblem& p) {
  std::vector<RowSpec> rows;
  const double dt = p.settings.dt;
  const double reach = std::max(std::abs(p.settings.v_min), std::abs(p.settings.v_max)) * dt;
  const Vec2 p0 = p.x0.head<2>();
  for (std::size_t i = 0; i < p.peds.size(); ++i) {
    const double margin = p.settings.robot_radius + p.peds[i].radius + p.margins.d_safety(p.peds[i].coop_label);
    // The barrier changes by at most delta per step, so row k is slack for
    // every admissible control sequence once h_k >= delta / gamma.
    const double delta = reach + p.peds[i].velocity.norm() * dt;
    for (int k = 0; k < p.h; ++k) {
      const double h_lb = (p0 - p.predicted[i][static_cast<std::size_t>(k)]).norm() - k * reach - margin;
      if (h_lb * p.margins.gamma < delta) rows.push_back({RowSpec::Barrier, static_cast<int>(i), k});
    }
  }
  for (int k = 1; k <= p.h; ++k) {
    for (int a = 0; a < 2; ++a) {
      if (std::abs(p0(a)) + k * reach <= p.settings.arena_half_extent) continue;
      rows.push_back({RowSpec::Box, a, k, 1.0});
      rows.push_back({RowSpec::Box, a, k, -1.0});
    }
  }
  return rows;
}

struct Linearization {
  std::vector<Vec3> xs;  // x_0..x_h
  std::vector<Mat> J;    // d x_k / d u, 3 x 2h
  Vec gradient;
  Mat hessian;
  Vec row_value;
  Mat row_jacobian;
};

Linearization linearize(const MpcProblem& p, const std::vector<Control>& u,
                        const std::vector<RowSpec>& rows) {
  const int n = 2 * p.h;
  const double dt = p.settings.dt;
  Linearization lin;
  lin.xs = rollout_unicycle(p.x0, u, dt);
  lin.J.assign(static_cast<std::size_t>(p.h + 1), Mat::Zero(3, n));
  for (int k = 0; k < p.h; ++k) {
    const Vec3& x = lin.xs[static_cast<std::size_t>(k)];
    const double v = u[static_cast<std::size_t>(k)].v;
    Eigen::Matrix3d A = Eigen::Matrix3d::Identity();
    A(0, 2) = -dt * v * std::sin(x.z());
    A(1, 2) = dt * v * std::cos(x.z());
    Mat next = A * lin.J[static_cast<std::size_t>(k)];
    next(0, 2 * k) += dt * std::cos(x.z());
    next(1, 2 * k) += dt * std::sin(x.z());
    next(2, 2 * k + 1) += dt;
    lin.J[static_cast<std::size_t>(k + 1)] = std::move(next);
  }

  lin.gradient = Vec::Zero(n);
  lin.hessian = Mat::Zero(n, n);
  for (int k = 0; k <= p.h; ++k) {
    const Mat& Jk = lin.J[static_cast<std::size_t>(k)];
    const Vec3 e = tracking_error(p, lin.xs[static_cast<std::size_t>(k)]);
    const Eigen::Matrix3d& W = k == p.h ? p.weights.Q_f : p.weights.Q;
    if (k > 0) {
      lin.gradient += 2.0 * Jk.transpose() * (W * e);
      lin.hessian += 2.0 * Jk.transpose() * W * Jk;
    }
    if (k == p.h) break;
    lin.gradient.segment<2>(2 * k) +=
        2.0 * p.weights.R * Eigen::Vector2d(u[static_cast<std::size_t>(k)].v, u[static_cast<std::size_t>(k)].w);
    lin.hessian.block<2, 2>(2 * k, 2 * k) += 2.0 * p.weights.R;
    if (k == 0) continue;

    const Vec2 pr = lin.xs[static_cast<std::size_t>(k)].head<2>();
    const Mat Jp = Jk.topRows(2);
    Eigen::Vector2d g = Eigen::Vector2d::Zero();
    Eigen::Matrix2d Hs = Eigen::Matrix2d::Zero();
    for (std::size_t i = 0; i < p.peds.size(); ++i) {
      const Vec2 d = pr - p.predicted[i][static_cast<std::size_t>(k)];
      const double P = p.peds[i].coop_prob;
      for (const auto& [weight, sigma] : {std::pair{P, p.weights.sigma_coop},
                                          std::pair{1.0 - P, p.weights.sigma_noncoop}}) {
        const double s2 = sigma * sigma;
        const double phi = weight * p.weights.eta * std::exp(-d.squaredNorm() / s2);
        g += -2.0 * phi / s2 * d;
        Hs += phi * (4.0 / (s2 * s2) * d * d.transpose() - 2.0 / s2 * Eigen::Matrix2d::Identity());
      }
    }
    // Only the convex part of the social Hessian enters the QP model.
    Eigen::SelfAdjointEigenSolver<Eigen::Matrix2d> eig(Hs);
    const Eigen::Matrix2d Hpsd = eig.eigenvectors() *
                                 eig.eigenvalues().cwiseMax(0.0).asDiagonal() *
                                 eig.eigenvectors().transpose();
    lin.gradient += Jp.transpose() * g;
    lin.hessian += Jp.transpose() * Hpsd * Jp;
  }

  const auto m = static_cast<Eigen::Index>(rows.size());
  lin.row_value = Vec::Zero(m);
  lin.row_jacobian = Mat::Zero(m, n);
  const double keep = 1.0 - p.margins.gamma;
  for (Eigen::Index r = 0; r < m; ++r) {
    const RowSpec& row = rows[static_cast<std::size_t>(r)];
    if (row.kind == RowSpec::Box) {
      const Vec3& x = lin.xs[static_cast<std::size_t>(row.k)];
      lin.row_value(r) = p.settings.arena_half_extent - row.sign * x(row.i);
      lin.row_jacobian.row(r) = -row.sign * lin.J[static_cast<std::size_t>(row.k)].row(row.i);
      continue;
    }
    const auto i = static_cast<std::size_t>(row.i);
    auto term = [&](int k, double scale) {
      const Vec2 d = lin.xs[static_cast<std::size_t>(k)].head<2>() - p.predicted[i][static_cast<std::size_t>(k)];
      const double dist = d.norm();
      lin.row_value(r) += scale * barrier_at(p, i, lin.xs[static_cast<std::size_t>(k)], k);
      if (k == 0 || dist < 1e-12) return;
      lin.row_jacobian.row(r) += scale * (d / dist).transpose() * lin.J[static_cast<std::size_t>(k)].topRows(2);
    };
    term(row.k + 1, 1.0);
    term(row.k, -keep);
  }
  return lin;
}

struct StepResult {
  bool ok = false;
  Vec delta;
};

StepResult qp_step(const MpcProblem& p, const std::vector<Control>& u, const Linearization& lin,
                   double trust) {
  const int n = 2 * p.h;
  // A row whose linearization stays nonnegative over the whole trust box
  // cannot need slack in this subproblem; leave it out.
  std::vector<Eigen::Index> live;
  for (Eigen::Index r = 0; r < lin.row_value.size(); ++r)
    if (lin.row_value(r) - trust * lin.row_jacobian.row(r).lpNorm<1>() < 0.0) live.push_back(r);
  const auto m = static_cast<Eigen::Index>(live.size());
  Mat G(m, n);
  Vec g(m);
  for (Eigen::Index r = 0; r < m; ++r) {
    G.row(r) = lin.row_jacobian.row(live[static_cast<std::size_t>(r)]);
    g(r) = lin.row_value(live[static_cast<std::size_t>(r)]);
  }
  const Eigen::Index nv = n + m;
  Mat P = Mat::Zero(nv, nv);
  P.topLeftCorner(n, n) = lin.hessian + 1e-9 * Mat::Identity(n, n);
  P.bottomRightCorner(m, m) = 2.0 * p.weights.rho_s * Mat::Identity(m, m);
  Vec q = Vec::Zero(nv);
  q.head(n) = lin.gradient;
  q.tail(m).setConstant(p.weights.rho_s_lin);

  Mat A = Mat::Zero(2 * m + 2 * n, nv);
  Vec b = Vec::Zero(2 * m + 2 * n);
  A.topLeftCorner(m, n) = G;
  A.block(0, n, m, m) = Mat::Identity(m, m);
  b.head(m) = -g;
  A.block(m, n, m, m) = Mat::Identity(m, m);
  for (int j = 0; j < n; ++j) {
    const Control& c = u[static_cast<std::size_t>(j / 2)];
    const double value = j % 2 == 0 ? c.v : c.w;
    const double lo = j % 2 == 0 ? p.settings.v_min : -p.settings.w_max;
    const double hi = j % 2 == 0 ? p.settings.v_max : p.settings.w_max;
    const Eigen::Index r = 2 * m + 2 * j;
    A(r, j) = 1.0;
    b(r) = std::min(0.0, std::max(lo - value, -trust));
    A(r + 1, j) = -1.0;
    b(r + 1) = -std::max(0.0, std::min(hi - value, trust));
  }
  Vec y0 = Vec::Zero(nv);
  y0.tail(m) = (-g).cwiseMax(0.0);

  const QpResult qp = solve_qp(P, q, A, b, y0);
  StepResult out;
  out.ok = qp.status == QpStatus::Solved;
  out.delta = qp.x.head(n);
  return out;
}

std::vector<Control> apply_step(const std::vector<Control>& u, const Vec& delta) {
  std::vector<Control> out = u;
  for (std::size_t k = 0; k < u.size(); ++k) {
    out[k].v += delta(static_cast<Eigen::Index>(2 * k));
    out[k].w += delta(static_cast<Eigen::Index>(2 * k + 1));
  }
  return out;
}

}  // namespace

double mpc_cost(const MpcProblem& problem, const std::vector<Control>& controls) {
  return cost_of(problem, rollout_unicycle(problem.x0, controls, problem.settings.dt), controls);
}

Mat barrier_residuals(const MpcProblem& problem, const std::vector<Control>& controls) {
  return residuals_of(problem, rollout_unicycle(problem.x0, controls, problem.settings.dt));
}

double mpc_merit(const MpcProblem& problem, const std::vector<Control>& controls) {
  return merit_of(problem, rollout_unicycle(problem.x0, controls, problem.settings.dt), controls);
}

std::vector<Control> control_lattice(const MpcSettings& s) {
  std::vector<Control> out;
  const int n = std::max(s.lattice_size, 2);
  for (int a = 0; a < n; ++a) {
    for (int b = 0; b < n; ++b) {
      out.push_back({s.v_min + (s.v_max - s.v_min) * a / (n - 1), -s.w_max + 2.0 * s.w_max * b / (n - 1)});
    }
  }
  return out;
}

std::vector<Control> shift_warm_start(const MpcSolution& previous, int h) {
  std::vector<Control> u;
  if (previous.controls.empty()) return u;
  for (std::size_t k = 1; k < previous.controls.size(); ++k) u.push_back(previous.controls[k]);
  if (u.empty()) u.push_back(previous.controls.back());
  while (static_cast<int>(u.size()) < h) u.push_back(u.back());
  u.resize(static_cast<std::size_t>(h));
  return u;
}

MpcSolution solve_mpc(const MpcProblem& problem, const MpcSolution* warm_start) {
  const MpcSettings& s = problem.settings;
  const auto h = static_cast<std::size_t>(problem.h);

  // Initial guess: best merit among the warm start, a go-to-goal rollout and
  // the constant-control lattice.
  std::vector<Control> u = clamp_all(s, goal_heuristic(problem));
  double merit = mpc_merit(problem, u);
  auto consider = [&](std::vector<Control> cand) {
    cand = clamp_all(s, std::move(cand));
    const double m = mpc_merit(problem, cand);
    if (m < merit) {
      merit = m;
      u = std::move(cand);
    }
  };
  if (warm_start) {
    auto w = shift_warm_start(*warm_start, problem.h);
    if (!w.empty()) consider(std::move(w));
  }
  for (const Control& c : control_lattice(s)) consider(std::vector<Control>(h, c));

  MpcSolution sol;
  sol.merit_history.push_back(merit);
  const std::vector<RowSpec> rows = relevant_rows(problem);
  double trust = s.trust_region;
  bool qp_failed = false;
  bool relinearize = true;
  Linearization lin;
  for (int it = 0; it < s.sqp_iterations; ++it) {
    sol.sqp_iterations = it + 1;
    if (relinearize) lin = linearize(problem, u, rows);
    const StepResult step = qp_step(problem, u, lin, trust);
    if (!step.ok) {
      qp_failed = true;
      break;
    }
    const bool converged = step.delta.lpNorm<Eigen::Infinity>() < s.step_tolerance;
    std::vector<Control> cand = clamp_all(s, apply_step(u, step.delta));
    const double cand_merit = mpc_merit(problem, cand);
    if (converged) {
      // The last small step still removes residual slack left by linearization error.
      if (cand_merit <= merit) {
        u = std::move(cand);
        merit = cand_merit;
        sol.merit_history.push_back(merit);
      }
      break;
    }
    if (cand_merit < merit) {
      u = std::move(cand);
      merit = cand_merit;
      sol.merit_history.push_back(merit);
      relinearize = true;
    } else {
      trust *= s.trust_shrink;
      relinearize = false;
    }
  }

  // Polish: a final step against small violations that only come from the
  // linearization error of the last accepted step.
  if (!qp_failed && !problem.peds.empty()) {
    const double worst = -std::min(0.0, barrier_residuals(problem, u).minCoeff());
    if (worst >= s.slack_tolerance && worst < 1e-3) {
      const StepResult step = qp_step(problem, u, linearize(problem, u, rows), trust);
      if (step.ok) {
        std::vector<Control> cand = clamp_all(s, apply_step(u, step.delta));
        const double cand_merit = mpc_merit(problem, cand);
        if (cand_merit <= merit) {
          u = std::move(cand);
          merit = cand_merit;
          sol.merit_history.push_back(merit);
        }
      }
    }
  }

  sol.controls = u;
  const std::vector<Vec3> xs = rollout_unicycle(problem.x0, u, s.dt);
  sol.states.assign(xs.begin() + 1, xs.end());
  const auto np = static_cast<Eigen::Index>(problem.peds.size());
  sol.barrier = Mat::Zero(np, problem.h + 1);
  for (Eigen::Index i = 0; i < np; ++i)
    for (int k = 0; k <= problem.h; ++k)
      sol.barrier(i, k) = barrier_at(problem, static_cast<std::size_t>(i), xs[static_cast<std::size_t>(k)], k);
  sol.slack = (-residuals_of(problem, xs)).cwiseMax(0.0);
  sol.cost = cost_of(problem, xs, u);
  sol.merit = merit;
  if (qp_failed) sol.status = MpcStatus::Degraded;
  else if (sol.slack.size() > 0 && sol.slack.maxCoeff() >= s.slack_tolerance) sol.status = MpcStatus::SlackActive;
  else sol.status = MpcStatus::Optimal;
  return sol;
}

std::string mpc_debug_json(const MpcProblem& problem, const MpcSolution& solution) {
  using nlohmann::json;
  json j;
  j["h"] = problem.h;
  j["x0"] = {problem.x0.x(), problem.x0.y(), problem.x0.z()};
  j["goal"] = {problem.goal.x(), problem.goal.y()};
  j["status"] = mpc_status_name(solution.status);
  j["cost"] = solution.cost;
  j["merit"] = solution.merit;
  j["sqp_iterations"] = solution.sqp_iterations;
  j["merit_history"] = solution.merit_history;
  json controls = json::array();
  for (const Control& c : solution.controls) controls.push_back({c.v, c.w});
  j["controls"] = controls;
  json states = json::array();
  for (const Vec3& x : solution.states) states.push_back({x.x(), x.y(), x.z()});
  j["states"] = states;
  json peds = json::array();
  for (std::size_t i = 0; i < problem.peds.size(); ++i) {
    json ped;
    ped["id"] = problem.peds[i].id;
    ped["coop_prob"] = problem.peds[i].coop_prob;
    ped["coop_label"] = problem.peds[i].coop_label;
    json traj = json::array();
    for (const Vec2& q : problem.predicted[i]) traj.push_back({q.x(), q.y()});
    ped["predicted"] = traj;
    const auto row = static_cast<Eigen::Index>(i);
    std::vector<double> barrier, slack;
    for (Eigen::Index k = 0; k < solution.barrier.cols(); ++k) barrier.push_back(solution.barrier(row, k));
    for (Eigen::Index k = 0; k < solution.slack.cols(); ++k) slack.push_back(solution.slack(row, k));
    ped["barrier"] = barrier;
    ped["slack"] = slack;
    peds.push_back(ped);
  }
  j["pedestrians"] = peds;
  return j.dump(2);
}

}  // namespace hnav
