#include "rct/kalman.hpp"

#include <cmath>
#include <stdexcept>

namespace rct::kalman {

namespace {

constexpr double kLog2Pi = 1.8378770664093454835606594728112;

void symmetrize(StateMatrix& m) { m = 0.5 * (m + m.transpose()).eval(); }

MeasMatrix innovation_cov(const KalmanState& s, const KalmanConfig& cfg) {
  const ObsMatrix& H = observation_matrix();
  MeasMatrix S = H * s.cov * H.transpose() + cfg.observation_cov;
  return 0.5 * (S + S.transpose());
}

double gaussian_log_density(const MeasVector& resid, const MeasMatrix& S) {
  Eigen::LLT<MeasMatrix> llt(S);
  if (llt.info() != Eigen::Success) {
    throw std::domain_error("innovation covariance is not positive definite");
  }
  const MeasVector z = llt.matrixL().solve(resid);
  double log_det = 0.0;
  for (int i = 0; i < 4; ++i) log_det += 2.0 * std::log(llt.matrixL()(i, i));
  return -0.5 * (z.squaredNorm() + log_det + 4.0 * kLog2Pi);
}

}  // namespace

Box KalmanState::box() const {
  return box_from_center({mean(kX), mean(kY)}, mean(kW), mean(kH));
}

KalmanConfig KalmanConfig::defaults() { return diagonal(1.0, 0.2, 1.0, 0.5, 0.5, 1.0); }

KalmanConfig KalmanConfig::diagonal(double trans_pos, double trans_vel, double trans_size,
                                    double obs_pos, double obs_size, double initial) {
  KalmanConfig cfg;
  cfg.transition_cov = StateMatrix::Zero();
  cfg.transition_cov.diagonal() << trans_pos, trans_pos, trans_vel, trans_vel, trans_size,
      trans_size;
  cfg.observation_cov = MeasMatrix::Zero();
  cfg.observation_cov.diagonal() << obs_pos, obs_pos, obs_size, obs_size;
  cfg.initial_cov = StateMatrix::Identity() * initial;
  return cfg;
}

StateMatrix transition(int steps) {
  StateMatrix F = StateMatrix::Identity();
  F(kX, kVx) = steps;
  F(kY, kVy) = steps;
  return F;
}

const ObsMatrix& observation_matrix() {
  static const ObsMatrix H = [] {
    ObsMatrix m = ObsMatrix::Zero();
    m(0, kX) = 1.0;
    m(1, kY) = 1.0;
    m(2, kW) = 1.0;
    m(3, kH) = 1.0;
    return m;
  }();
  return H;
}

MeasVector measurement(const Box& b) {
  const Point c = center(b);
  return MeasVector(c.x, c.y, b.w, b.h);
}

KalmanState init(const Box& b, const KalmanConfig& cfg) {
  KalmanState s;
  const Point c = center(b);
  s.mean << c.x, c.y, 0.0, 0.0, b.w, b.h;
  s.cov = cfg.initial_cov;
  return s;
}

KalmanState predict(const KalmanState& s, const KalmanConfig& cfg) {
  static const StateMatrix F = transition(1);
  KalmanState out;
  out.mean = F * s.mean;
  out.cov = F * s.cov * F.transpose() + cfg.transition_cov;
  symmetrize(out.cov);
  return out;
}

KalmanState update(const KalmanState& s, const Observation& obs, const KalmanConfig& cfg) {
  if (!obs) return s;
  const MeasVector z = measurement(*obs);
  if (!z.allFinite()) throw std::invalid_argument("non-finite observation");
  const ObsMatrix& H = observation_matrix();
  const MeasMatrix S = innovation_cov(s, cfg);
  const Eigen::Matrix<double, 6, 4> PHt = s.cov * H.transpose();
  // K = P H^T S^-1, computed as (S^-1 H P)^T since S is symmetric.
  const Eigen::Matrix<double, 6, 4> K = S.llt().solve(PHt.transpose()).transpose();
  KalmanState out;
  out.mean = s.mean + K * (z - H * s.mean);
  // Joseph form keeps the covariance PSD.
  const StateMatrix IKH = StateMatrix::Identity() - K * H;
  out.cov = IKH * s.cov * IKH.transpose() + K * cfg.observation_cov * K.transpose();
  symmetrize(out.cov);
  return out;
}

double log_likelihood(const KalmanState& s, const Box& b, const KalmanConfig& cfg) {
  const MeasVector resid = measurement(b) - observation_matrix() * s.mean;
  return gaussian_log_density(resid, innovation_cov(s, cfg));
}

double likelihood(const KalmanState& s, const Box& b, const KalmanConfig& cfg) {
  return std::exp(log_likelihood(s, b, cfg));
}

double log_likelihood_shared(const KalmanState& mean_state, const KalmanState& cov_state,
                             const Box& b, const KalmanConfig& cfg) {
  const MeasVector resid = measurement(b) - observation_matrix() * mean_state.mean;
  return gaussian_log_density(resid, innovation_cov(cov_state, cfg));
}

std::vector<FilterStep> filter(std::span<const Observation> obs, const Box& init_box,
                               const KalmanConfig& cfg) {
  std::vector<FilterStep> steps;
  steps.reserve(obs.size());
  for (std::size_t t = 0; t < obs.size(); ++t) {
    FilterStep st;
    st.predicted = t == 0 ? init(init_box, cfg) : predict(steps.back().filtered, cfg);
    st.filtered = update(st.predicted, obs[t], cfg);
    steps.push_back(st);
  }
  return steps;
}

std::vector<KalmanState> smooth(std::span<const Observation> obs, const Box& init_box,
                                const KalmanConfig& cfg) {
  const std::vector<FilterStep> fwd = filter(obs, init_box, cfg);
  std::vector<KalmanState> out(fwd.size());
  if (fwd.empty()) return out;
  static const StateMatrix F = transition(1);
  out.back() = fwd.back().filtered;
  for (std::size_t i = fwd.size() - 1; i-- > 0;) {
    const KalmanState& filt = fwd[i].filtered;
    const KalmanState& pred = fwd[i + 1].predicted;
    // G = P_f F^T P_p^-1
    const StateMatrix G =
        pred.cov.ldlt().solve(F * filt.cov.transpose()).transpose();
    out[i].mean = filt.mean + G * (out[i + 1].mean - pred.mean);
    out[i].cov = filt.cov + G * (out[i + 1].cov - pred.cov) * G.transpose();
    symmetrize(out[i].cov);
  }
  return out;
}

KalmanState time_reversed(const KalmanState& s) {
  StateMatrix T = StateMatrix::Identity();
  T(kVx, kVx) = -1.0;
  T(kVy, kVy) = -1.0;
  KalmanState out;
  out.mean = T * s.mean;
  out.cov = T * s.cov * T;
  return out;
}

}  // namespace rct::kalman
