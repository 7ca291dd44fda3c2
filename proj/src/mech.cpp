#include "tdsim/mech.hpp"

#include <Eigen/LU>
#include <cmath>
#include <queue>
#include <set>
#include <sstream>

namespace tdsim::mech {

namespace {

void check_module(const ModuleSpec& m) {
  if (m.name.empty() || m.name.find('.') != std::string::npos ||
      m.name.find('/') != std::string::npos)
    throw ValidationError("aggregate: malformed module name '" + m.name + "'");
  if (!(m.m > 0)) throw ValidationError("module '" + m.name + "': mass must be > 0");
  if ((m.J - m.J.transpose()).norm() > 1e-9 * (1.0 + m.J.norm()))
    throw ValidationError("module '" + m.name + "': inertia must be symmetric");
  Eigen::SelfAdjointEigenSolver<Mat3> es(m.J);
  if (es.eigenvalues().minCoeff() <= 0)
    throw ValidationError("module '" + m.name + "': inertia must be positive definite");
  for (const Place& p : m.places) {
    if (std::abs(p.q.norm() - 1.0) > 1e-9)
      throw ValidationError("module '" + m.name + "': place quaternion not unit norm");
  }
  switch (m.type) {
    case ModuleType::Rigid:
      if (!m.harmonics.empty() || m.wheel.JF != 0)
        throw ValidationError("module '" + m.name + "': rigid body cannot carry modes or wheel");
      break;
    case ModuleType::Console:
      if (m.places.size() != 1)
        throw ValidationError("module '" + m.name + "': console needs exactly one place");
      if (m.harmonics.empty())
        throw ValidationError("module '" + m.name + "': console needs at least one harmonic");
      for (const Harmonic& h : m.harmonics) {
        if (!(h.A > 0) || h.c < 0 || h.eps < 0)
          throw ValidationError("module '" + m.name + "': harmonic needs A > 0, c >= 0, eps >= 0");
      }
      break;
    case ModuleType::Flywheel:
      if (m.places.size() != 1)
        throw ValidationError("module '" + m.name + "': flywheel needs exactly one place");
      if (!(m.wheel.JF > 0))
        throw ValidationError("module '" + m.name + "': wheel inertia must be > 0");
      if (std::abs(m.wheel.axis.norm() - 1.0) > 1e-9)
        throw ValidationError("module '" + m.name + "': wheel axis must be a unit vector");
      break;
  }
}

// Module-frame offset of a place including translational modal displacement.
Vec3 place_offset(const ModuleSpec& spec, const ModuleState& s, int place) {
  Vec3 u = spec.places[place].rho;
  if (spec.type == ModuleType::Console) {
    for (std::size_t k = 0; k < spec.harmonics.size(); ++k)
      u += spec.harmonics[k].phi_t * s.qgen[static_cast<long>(k)];
  }
  return u;
}

// World-frame modal velocity contributions at the (single) console place.
void modal_rates(const ModuleSpec& spec, const ModuleState& s, Vec3& lin, Vec3& ang) {
  lin.setZero();
  ang.setZero();
  if (spec.type != ModuleType::Console) return;
  Vec3 dl = Vec3::Zero(), da = Vec3::Zero();
  for (std::size_t k = 0; k < spec.harmonics.size(); ++k) {
    dl += spec.harmonics[k].phi_t * s.qdot[static_cast<long>(k)];
    da += spec.harmonics[k].phi_r * s.qdot[static_cast<long>(k)];
  }
  lin = s.q * dl;
  ang = s.q * da;
}

ModuleCoefficients compute_coefficients(const ModuleSpec& spec, const Mat3& J_inv,
                                        const Mat3& J_eff_inv, const ModuleState& s,
                                        const ModuleExternal& ext) {
  ModuleCoefficients c;
  const int n = spec.dof();
  const int np = static_cast<int>(spec.places.size());
  const Mat3 R = s.q.toRotationMatrix();
  const Mat3 Jw = R * spec.J * R.transpose();
  const Mat3 Jw_inv = R * J_inv * R.transpose();

  c.a_q = VecX::Zero(n);

  // modal sums for consoles
  Vec3 mod_disp_rate = Vec3::Zero();   // R * sum(phi_t * qd)
  Vec3 mod_ang_rate = Vec3::Zero();    // R * sum(phi_r * qd)
  if (spec.type == ModuleType::Console) {
    Vec3 dt_local = Vec3::Zero(), dr_local = Vec3::Zero();
    for (std::size_t k = 0; k < spec.harmonics.size(); ++k) {
      dt_local += spec.harmonics[k].phi_t * s.qdot[static_cast<long>(k)];
      dr_local += spec.harmonics[k].phi_r * s.qdot[static_cast<long>(k)];
    }
    mod_disp_rate = R * dt_local;
    mod_ang_rate = R * dr_local;
  }

  c.bias_lin.resize(np);
  c.bias_ang.resize(np);
  c.P_lin.assign(np, Mat3::Identity());
  c.Q_lin.resize(np);
  c.P_ang.assign(np, Mat3::Zero());
  c.Q_ang.assign(np, Mat3::Identity());
  c.R_lin.assign(np, Eigen::Matrix<double, 3, Eigen::Dynamic>::Zero(3, n));
  c.R_ang.assign(np, Eigen::Matrix<double, 3, Eigen::Dynamic>::Zero(3, n));
  c.D_v.resize(np);
  c.E_v.assign(np, Mat3::Zero());
  c.D_w.resize(np);
  c.E_w.resize(np);
  c.K.assign(np, Eigen::Matrix<double, Eigen::Dynamic, 3>::Zero(n, 3));
  c.L.assign(np, Eigen::Matrix<double, Eigen::Dynamic, 3>::Zero(n, 3));

  std::vector<Vec3> levers(np);
  for (int i = 0; i < np; ++i) {
    levers[i] = R * place_offset(spec, s, i);
    c.bias_lin[i] = s.w.cross(s.w.cross(levers[i])) + 2.0 * s.w.cross(mod_disp_rate);
    c.bias_ang[i] = s.w.cross(mod_ang_rate);
    c.Q_lin[i] = -skew(levers[i]);
    if (spec.type == ModuleType::Console) {
      for (std::size_t k = 0; k < spec.harmonics.size(); ++k) {
        c.R_lin[i].col(static_cast<long>(k)) = R * spec.harmonics[k].phi_t;
        c.R_ang[i].col(static_cast<long>(k)) = R * spec.harmonics[k].phi_r;
      }
    }
    c.D_v[i] = Mat3::Identity() / spec.m;
  }

  c.a_v = ext.accel + ext.force / spec.m;
  const Vec3 gyro = s.w.cross(Jw * s.w);

  switch (spec.type) {
    case ModuleType::Rigid:
    case ModuleType::Console: {
      c.a_w = Jw_inv * (ext.torque - gyro);
      for (int i = 0; i < np; ++i) {
        c.D_w[i] = Jw_inv * skew(levers[i]);
        c.E_w[i] = Jw_inv;
      }
      if (spec.type == ModuleType::Console) {
        for (std::size_t k = 0; k < spec.harmonics.size(); ++k) {
          const Harmonic& hk = spec.harmonics[k];
          const long kl = static_cast<long>(k);
          c.a_q[kl] = (-hk.eps * s.qdot[kl] - hk.c * s.qgen[kl]) / hk.A;
          c.K[0].row(kl) = (R * hk.phi_t).transpose() / hk.A;
          c.L[0].row(kl) = (R * hk.phi_r).transpose() / hk.A;
        }
      }
      break;
    }
    case ModuleType::Flywheel: {
      const Vec3 ew = R * spec.wheel.axis;
      const double JF = spec.wheel.JF;
      const double Omega = s.qdot[0];
      const double u = ext.wheel_torque;
      const Mat3 Jeff_w_inv = R * J_eff_inv * R.transpose();
      c.a_w = Jeff_w_inv * (ext.torque - gyro + JF * Omega * ew.cross(s.w) - u * ew);
      c.D_w[0] = Jeff_w_inv * skew(levers[0]);
      c.E_w[0] = Jeff_w_inv;
      c.a_q[0] = u / JF - ew.dot(c.a_w);
      c.K[0].row(0) = -(ew.transpose() * c.D_w[0]);
      c.L[0].row(0) = -(ew.transpose() * c.E_w[0]);
      break;
    }
  }
  return c;
}

}  // namespace

ModuleCoefficients module_coefficients(const ModuleSpec& spec, const ModuleState& state,
                                       const ModuleExternal& ext) {
  check_module(spec);
  const Mat3 J_inv = spec.J.inverse();
  Mat3 J_eff_inv = Mat3::Zero();
  if (spec.type == ModuleType::Flywheel) {
    const Mat3 Jeff = spec.J - spec.wheel.JF * spec.wheel.axis * spec.wheel.axis.transpose();
    J_eff_inv = Jeff.inverse();
  }
  return compute_coefficients(spec, J_inv, J_eff_inv, state, ext);
}

Aggregate::Aggregate(AggregateSpec spec) : spec_(std::move(spec)) {
  if (spec_.modules.empty()) throw ValidationError("aggregate: needs at least one module");
  std::set<std::string> names;
  for (const ModuleSpec& m : spec_.modules) {
    check_module(m);
    if (!names.insert(m.name).second)
      throw ValidationError("aggregate: duplicate module name '" + m.name + "'");
  }

  // link sanity: valid endpoints, each place used at most once, tree topology
  std::set<std::pair<int, int>> used;
  std::vector<std::vector<int>> adj(spec_.modules.size());
  for (const LinkSpec& l : spec_.links) {
    for (auto [mi, pi] : {std::pair{l.module_a, l.place_a}, std::pair{l.module_b, l.place_b}}) {
      if (mi < 0 || mi >= static_cast<int>(spec_.modules.size()))
        throw ValidationError("aggregate: link references unknown module");
      if (pi < 0 || pi >= static_cast<int>(spec_.modules[mi].places.size()))
        throw ValidationError("aggregate: link references unknown place on module '" +
                              spec_.modules[mi].name + "'");
      if (!used.insert({mi, pi}).second)
        throw ValidationError("aggregate: place " + std::to_string(pi) + " of module '" +
                              spec_.modules[mi].name + "' used by more than one link");
    }
    adj[l.module_a].push_back(l.module_b);
    adj[l.module_b].push_back(l.module_a);
  }
  if (spec_.links.size() + 1 != spec_.modules.size())
    throw ValidationError("aggregate: link topology must be a connected tree");
  std::vector<char> seen(spec_.modules.size(), 0);
  std::queue<int> bfs;
  bfs.push(0);
  seen[0] = 1;
  int reached = 0;
  while (!bfs.empty()) {
    int u = bfs.front();
    bfs.pop();
    ++reached;
    for (int v : adj[u])
      if (!seen[v]) {
        seen[v] = 1;
        bfs.push(v);
      }
  }
  if (reached != static_cast<int>(spec_.modules.size()))
    throw ValidationError("aggregate: link topology must be a connected tree");

  for (const ModuleSpec& m : spec_.modules) {
    offsets_.push_back(state_size_);
    state_size_ += 13 + 2 * m.dof();
    unknown_off_.push_back(unknowns_);
    unknowns_ += 6 + m.dof();
    J_inv_.push_back(m.J.inverse());
    if (m.type == ModuleType::Flywheel) {
      const Mat3 Jeff = m.J - m.wheel.JF * m.wheel.axis * m.wheel.axis.transpose();
      Eigen::SelfAdjointEigenSolver<Mat3> es(Jeff);
      if (es.eigenvalues().minCoeff() <= 0)
        throw ValidationError("module '" + m.name +
                              "': carrier inertia J - JF e e^T must stay positive definite");
      J_eff_inv_.push_back(Jeff.inverse());
    } else {
      J_eff_inv_.push_back(Mat3::Zero());
    }
  }
  const int total = unknowns_ + 6 * static_cast<int>(spec_.links.size());
  A_.resize(total, total);
  b_.resize(total);
}

void Aggregate::pack_module(const ModuleState& s, std::span<double> x, int module) const {
  const int n = spec_.modules[module].dof();
  double* p = x.data() + offsets_[module];
  Eigen::Map<Vec3>{p} = s.r;
  p[3] = s.q.w();
  p[4] = s.q.x();
  p[5] = s.q.y();
  p[6] = s.q.z();
  for (int k = 0; k < n; ++k) p[7 + k] = s.qgen[k];
  Eigen::Map<Vec3>{p + 7 + n} = s.v;
  Eigen::Map<Vec3>{p + 10 + n} = s.w;
  for (int k = 0; k < n; ++k) p[13 + n + k] = s.qdot[k];
}

ModuleState Aggregate::unpack_module(std::span<const double> x, int module) const {
  const int n = spec_.modules[module].dof();
  const double* p = x.data() + offsets_[module];
  ModuleState s;
  s.r = Eigen::Map<const Vec3>(p);
  s.q = Quat(p[3], p[4], p[5], p[6]);
  s.qgen = VecX::Zero(n);
  s.qdot = VecX::Zero(n);
  for (int k = 0; k < n; ++k) s.qgen[k] = p[7 + k];
  s.v = Eigen::Map<const Vec3>(p + 7 + n);
  s.w = Eigen::Map<const Vec3>(p + 10 + n);
  for (int k = 0; k < n; ++k) s.qdot[k] = p[13 + n + k];
  return s;
}

std::vector<ModuleState> Aggregate::unpack(std::span<const double> x) const {
  std::vector<ModuleState> out;
  out.reserve(spec_.modules.size());
  for (int i = 0; i < module_count(); ++i) out.push_back(unpack_module(x, i));
  return out;
}

void Aggregate::initial_state(std::span<double> x) const {
  std::vector<ModuleState> states(spec_.modules.size());
  for (std::size_t i = 0; i < spec_.modules.size(); ++i) {
    const ModuleSpec& m = spec_.modules[i];
    const int n = m.dof();
    states[i].qgen = VecX::Zero(n);
    states[i].qdot = VecX::Zero(n);
    if (m.type == ModuleType::Console) {
      for (int k = 0; k < n; ++k) {
        states[i].qgen[k] = m.harmonics[k].q0;
        states[i].qdot[k] = m.harmonics[k].qd0;
      }
    } else if (m.type == ModuleType::Flywheel) {
      states[i].qdot[0] = m.wheel.Omega0;
    }
  }
  states[0].r = spec_.r0;
  states[0].q = spec_.q0.normalized();
  states[0].v = spec_.v0;
  states[0].w = spec_.w0;

  // walk the tree so linked places coincide and move rigidly together
  std::vector<char> posed(spec_.modules.size(), 0);
  posed[0] = 1;
  bool progress = true;
  while (progress) {
    progress = false;
    for (const LinkSpec& l : spec_.links) {
      int pa = -1, pb = -1;
      if (posed[l.module_a] && !posed[l.module_b]) {
        pa = l.module_a;
        pb = l.module_b;
      } else if (posed[l.module_b] && !posed[l.module_a]) {
        pa = l.module_b;
        pb = l.module_a;
      } else {
        continue;
      }
      const int place_a = pa == l.module_a ? l.place_a : l.place_b;
      const int place_b = pa == l.module_a ? l.place_b : l.place_a;
      const ModuleState& sa = states[pa];
      ModuleState& sb = states[pb];
      const Quat qa_place = sa.q * spec_.modules[pa].places[place_a].q;
      sb.q = (qa_place * spec_.modules[pb].places[place_b].q.conjugate()).normalized();
      const Vec3 attach = sa.r + sa.q * place_offset(spec_.modules[pa], sa, place_a);
      sb.r = attach - sb.q * place_offset(spec_.modules[pb], sb, place_b);
      // match the full place velocities, modal rates included; the solver
      // only constrains accelerations, so an initial gap would persist
      Vec3 lin_a, ang_a, lin_b, ang_b;
      modal_rates(spec_.modules[pa], sa, lin_a, ang_a);
      modal_rates(spec_.modules[pb], sb, lin_b, ang_b);
      const Vec3 place_v = sa.v + sa.w.cross(attach - sa.r) + lin_a;
      const Vec3 place_w = sa.w + ang_a;
      sb.w = place_w - ang_b;
      sb.v = place_v - sb.w.cross(attach - sb.r) - lin_b;
      posed[pb] = 1;
      progress = true;
    }
  }
  for (int i = 0; i < module_count(); ++i) pack_module(states[i], x, i);
}

SolveResult Aggregate::assemble_and_solve(const std::vector<ModuleState>& states,
                                          const std::vector<ModuleExternal>& ext) const {
  const int nm = module_count();
  if (static_cast<int>(states.size()) != nm || static_cast<int>(ext.size()) != nm)
    throw ValidationError("aggregate: states/ext size mismatch");

  std::vector<ModuleCoefficients> coeffs(nm);
  for (int i = 0; i < nm; ++i)
    coeffs[i] = compute_coefficients(spec_.modules[i], J_inv_[i], J_eff_inv_[i], states[i], ext[i]);

  const int nl = static_cast<int>(spec_.links.size());
  const int total = unknowns_ + 6 * nl;
  A_.setZero();
  b_.setZero();

  // module dynamics rows: acceleration unknowns minus load couplings
  for (int i = 0; i < nm; ++i) {
    const int off = unknown_off_[i];
    const int n = spec_.modules[i].dof();
    A_.block<3, 3>(off, off).setIdentity();
    A_.block<3, 3>(off + 3, off + 3).setIdentity();
    for (int k = 0; k < n; ++k) A_(off + 6 + k, off + 6 + k) = 1.0;
    b_.segment<3>(off) = coeffs[i].a_v;
    b_.segment<3>(off + 3) = coeffs[i].a_w;
    b_.segment(off + 6, n) = coeffs[i].a_q;
  }
  for (int l = 0; l < nl; ++l) {
    const LinkSpec& lk = spec_.links[l];
    const int fcol = unknowns_ + 6 * l;      // F columns
    const int mcol = fcol + 3;               // M columns
    for (int side = 0; side < 2; ++side) {
      const int mi = side == 0 ? lk.module_a : lk.module_b;
      const int pi = side == 0 ? lk.place_a : lk.place_b;
      const double sgn = side == 0 ? 1.0 : -1.0;  // load on A is (F,M); on B the opposite
      const int off = unknown_off_[mi];
      const int n = spec_.modules[mi].dof();
      const ModuleCoefficients& c = coeffs[mi];
      A_.block<3, 3>(off, fcol) -= sgn * c.D_v[pi];
      A_.block<3, 3>(off, mcol) -= sgn * c.E_v[pi];
      A_.block<3, 3>(off + 3, fcol) -= sgn * c.D_w[pi];
      A_.block<3, 3>(off + 3, mcol) -= sgn * c.E_w[pi];
      A_.block(off + 6, fcol, n, 3) -= sgn * c.K[pi];
      A_.block(off + 6, mcol, n, 3) -= sgn * c.L[pi];
    }
  }

  // link compatibility rows: equal place accelerations on both sides
  for (int l = 0; l < nl; ++l) {
    const LinkSpec& lk = spec_.links[l];
    const int row = unknowns_ + 6 * l;
    for (int side = 0; side < 2; ++side) {
      const int mi = side == 0 ? lk.module_a : lk.module_b;
      const int pi = side == 0 ? lk.place_a : lk.place_b;
      const double sgn = side == 0 ? 1.0 : -1.0;
      const int off = unknown_off_[mi];
      const int n = spec_.modules[mi].dof();
      const ModuleCoefficients& c = coeffs[mi];
      A_.block<3, 3>(row, off) += sgn * c.P_lin[pi];
      A_.block<3, 3>(row, off + 3) += sgn * c.Q_lin[pi];
      A_.block(row, off + 6, 3, n) += sgn * c.R_lin[pi];
      A_.block<3, 3>(row + 3, off) += sgn * c.P_ang[pi];
      A_.block<3, 3>(row + 3, off + 3) += sgn * c.Q_ang[pi];
      A_.block(row + 3, off + 6, 3, n) += sgn * c.R_ang[pi];
      b_.segment<3>(row) -= sgn * c.bias_lin[pi];
      b_.segment<3>(row + 3) -= sgn * c.bias_ang[pi];
    }
  }

  Eigen::PartialPivLU<MatX> lu(A_);
  VecX sol = lu.solve(b_);
  const double scale = A_.cwiseAbs().maxCoeff() * sol.cwiseAbs().maxCoeff() +
                       b_.cwiseAbs().maxCoeff();
  const double resid = (A_ * sol - b_).cwiseAbs().maxCoeff();
  if (!sol.allFinite() || resid > 1e-10 * std::max(scale, 1.0)) {
    // failure path: probe which link makes the system defective
    Eigen::FullPivLU<MatX> full(A_);
    full.setThreshold(1e-10);
    std::ostringstream os;
    os << "inconsistent aggregate (rank " << full.rank() << " of " << total << ")";
    for (int l = 0; l < nl; ++l) {
      std::vector<int> keep;
      for (int r = 0; r < total; ++r) {
        const int fcol = unknowns_ + 6 * l;
        if (r >= fcol && r < fcol + 6) continue;
        keep.push_back(r);
      }
      MatX sub(keep.size(), keep.size());
      for (std::size_t i = 0; i < keep.size(); ++i)
        for (std::size_t j = 0; j < keep.size(); ++j) sub(i, j) = A_(keep[i], keep[j]);
      Eigen::FullPivLU<MatX> plu(sub);
      plu.setThreshold(1e-10);
      if (plu.rank() == static_cast<long>(keep.size())) {
        os << "; suspect link " << l << " (" << spec_.modules[spec_.links[l].module_a].name
           << " <-> " << spec_.modules[spec_.links[l].module_b].name << ")";
        break;
      }
    }
    throw NumericError(os.str());
  }

  SolveResult out;
  out.vdot.resize(nm);
  out.wdot.resize(nm);
  out.qddot.resize(nm);
  for (int i = 0; i < nm; ++i) {
    const int off = unknown_off_[i];
    const int n = spec_.modules[i].dof();
    out.vdot[i] = sol.segment<3>(off);
    out.wdot[i] = sol.segment<3>(off + 3);
    out.qddot[i] = sol.segment(off + 6, n);
  }
  out.loads.resize(nl);
  for (int l = 0; l < nl; ++l) {
    out.loads[l].F = sol.segment<3>(unknowns_ + 6 * l);
    out.loads[l].M = sol.segment<3>(unknowns_ + 6 * l + 3);
  }
  return out;
}

void Aggregate::derivative(std::span<const double> x, const std::vector<ModuleExternal>& ext,
                           std::span<double> dx) const {
  const std::vector<ModuleState> states = unpack(x);
  const SolveResult sol = assemble_and_solve(states, ext);
  for (int i = 0; i < module_count(); ++i) {
    const int n = spec_.modules[i].dof();
    double* p = dx.data() + offsets_[i];
    const ModuleState& s = states[i];
    Eigen::Map<Vec3>{p} = s.v;
    // qdot = 1/2 (0, w_world) * q
    const Quat wq(0.0, s.w.x(), s.w.y(), s.w.z());
    const Quat qd = wq * s.q;
    p[3] = 0.5 * qd.w();
    p[4] = 0.5 * qd.x();
    p[5] = 0.5 * qd.y();
    p[6] = 0.5 * qd.z();
    for (int k = 0; k < n; ++k) p[7 + k] = s.qdot[k];
    Eigen::Map<Vec3>{p + 7 + n} = sol.vdot[i];
    Eigen::Map<Vec3>{p + 10 + n} = sol.wdot[i];
    for (int k = 0; k < n; ++k) p[13 + n + k] = sol.qddot[i][k];
  }
}

void Aggregate::normalize_quaternions(std::span<double> x) const {
  for (int i = 0; i < module_count(); ++i) {
    double* p = x.data() + offsets_[i] + 3;
    const double n = std::sqrt(p[0] * p[0] + p[1] * p[1] + p[2] * p[2] + p[3] * p[3]);
    if (n > 0) {
      p[0] /= n;
      p[1] /= n;
      p[2] /= n;
      p[3] /= n;
    }
  }
}

Vec3 Aggregate::linear_momentum(const std::vector<ModuleState>& states) const {
  Vec3 p = Vec3::Zero();
  for (int i = 0; i < module_count(); ++i) p += spec_.modules[i].m * states[i].v;
  return p;
}

Vec3 Aggregate::angular_momentum(const std::vector<ModuleState>& states) const {
  Vec3 L = Vec3::Zero();
  for (int i = 0; i < module_count(); ++i) {
    const ModuleSpec& m = spec_.modules[i];
    const ModuleState& s = states[i];
    const Mat3 R = s.q.toRotationMatrix();
    L += s.r.cross(m.m * s.v) + R * m.J * R.transpose() * s.w;
    if (m.type == ModuleType::Flywheel) L += m.wheel.JF * s.qdot[0] * (R * m.wheel.axis);
  }
  return L;
}

double Aggregate::energy(const std::vector<ModuleState>& states) const {
  double e = 0.0;
  for (int i = 0; i < module_count(); ++i) {
    const ModuleSpec& m = spec_.modules[i];
    const ModuleState& s = states[i];
    const Mat3 R = s.q.toRotationMatrix();
    e += 0.5 * m.m * s.v.squaredNorm() + 0.5 * s.w.dot(R * m.J * R.transpose() * s.w);
    if (m.type == ModuleType::Console) {
      for (std::size_t k = 0; k < m.harmonics.size(); ++k) {
        const long kl = static_cast<long>(k);
        e += 0.5 * m.harmonics[k].A * s.qdot[kl] * s.qdot[kl] +
             0.5 * m.harmonics[k].c * s.qgen[kl] * s.qgen[kl];
      }
    } else if (m.type == ModuleType::Flywheel) {
      const Vec3 ew = R * m.wheel.axis;
      e += 0.5 * m.wheel.JF * s.qdot[0] * s.qdot[0] + m.wheel.JF * s.qdot[0] * ew.dot(s.w);
    }
  }
  return e;
}

namespace {

class AggregateComponent : public Component {
 public:
  AggregateComponent(std::string id, AggregateSpec spec, AggregateBindings bindings)
      : Component(std::move(id)), agg_(std::move(spec)) {
    const auto& modules = agg_.spec().modules;
    if (bindings.accel) {
      accel_input_ = 0;
      add_input("accel", ValueTag::Vec3, *bindings.accel, /*state_update=*/true);
    }
    int next = accel_input_ == 0 ? 1 : 0;
    force_input_.assign(modules.size(), -1);
    torque_input_.assign(modules.size(), -1);
    wheel_input_.assign(modules.size(), -1);
    auto bind = [&](const std::map<std::string, std::string>& map, const std::string& name,
                    std::size_t i, const char* prefix, std::vector<int>& slot) {
      auto it = map.find(name);
      if (it == map.end()) return;
      slot[i] = next++;
      add_input(std::string(prefix) + "_" + name, ValueTag::Vec3, it->second, true);
    };
    for (std::size_t i = 0; i < modules.size(); ++i) {
      bind(bindings.force, modules[i].name, i, "F", force_input_);
      bind(bindings.torque, modules[i].name, i, "M", torque_input_);
      auto it = bindings.wheel_torque.find(modules[i].name);
      if (it != bindings.wheel_torque.end()) {
        if (modules[i].type != ModuleType::Flywheel)
          throw ValidationError("aggregate: wheel torque bound to non-flywheel '" +
                                modules[i].name + "'");
        wheel_input_[i] = next++;
        add_input("u_" + modules[i].name, ValueTag::Scalar, it->second, true);
      }
    }
    for (const auto& m : modules) {
      add_output("r_" + m.name, ValueTag::Vec3);
      add_output("q_" + m.name, ValueTag::Quat);
      add_output("v_" + m.name, ValueTag::Vec3);
      add_output("w_" + m.name, ValueTag::Vec3);
      add_output("phi_" + m.name, ValueTag::Vec3);
      if (m.type == ModuleType::Flywheel) add_output("Omega_" + m.name, ValueTag::Scalar);
      if (m.type == ModuleType::Console) {
        for (std::size_t k = 0; k < m.harmonics.size(); ++k) {
          add_output("qm_" + m.name + "_" + std::to_string(k + 1), ValueTag::Scalar);
          add_output("qd_" + m.name + "_" + std::to_string(k + 1), ValueTag::Scalar);
        }
      }
    }
  }

  std::string_view kind() const override { return "mech.aggregate"; }
  int state_size() const override { return agg_.state_size(); }
  void init_state(std::span<double> x) const override { agg_.initial_state(x); }
  std::vector<std::string> provided_frames() const override {
    std::vector<std::string> out;
    for (const auto& m : agg_.spec().modules) out.push_back(id() + "/" + m.name);
    return out;
  }

  void eval(EvalContext& ctx) override {
    auto x = ctx.state();
    std::size_t port = 0;
    for (int i = 0; i < agg_.module_count(); ++i) {
      const ModuleSpec& m = agg_.spec().modules[i];
      const ModuleState s = agg_.unpack_module(x, i);
      ctx.out(port++, s.r);
      ctx.out(port++, s.q);
      ctx.out(port++, s.v);
      ctx.out(port++, s.w);
      ctx.out(port++, rotation_vector(s.q));
      if (m.type == ModuleType::Flywheel) ctx.out(port++, s.qdot[0]);
      if (m.type == ModuleType::Console) {
        for (long k = 0; k < s.qgen.size(); ++k) {
          ctx.out(port++, s.qgen[k]);
          ctx.out(port++, s.qdot[k]);
        }
      }
      WorldPose wp;
      wp.r = s.r;
      wp.q = s.q;
      wp.v = s.v;
      wp.w = s.w;
      ctx.frames().add_world(id() + "/" + m.name, wp);
    }
  }

  void derivative(EvalContext& ctx, std::span<double> dx) override {
    std::vector<ModuleExternal> ext(agg_.module_count());
    Vec3 accel = Vec3::Zero();
    if (accel_input_ >= 0) accel = ctx.in(accel_input_).as_vec3();
    for (int i = 0; i < agg_.module_count(); ++i) {
      ext[i].accel = accel;
      if (force_input_[i] >= 0) ext[i].force = ctx.in(force_input_[i]).as_vec3();
      if (torque_input_[i] >= 0) ext[i].torque = ctx.in(torque_input_[i]).as_vec3();
      if (wheel_input_[i] >= 0) ext[i].wheel_torque = ctx.in(wheel_input_[i]).as_scalar();
    }
    agg_.derivative(ctx.state(), ext, dx);
  }

  void post_step(std::span<double> x) const override { agg_.normalize_quaternions(x); }

 private:
  Aggregate agg_;
  int accel_input_ = -1;
  std::vector<int> force_input_, torque_input_, wheel_input_;
};

}  // namespace

std::unique_ptr<Component> aggregate_component(std::string id, AggregateSpec spec,
                                               AggregateBindings bindings) {
  return std::make_unique<AggregateComponent>(std::move(id), std::move(spec), std::move(bindings));
}

}  // namespace tdsim::mech
