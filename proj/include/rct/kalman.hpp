#pragma once

#include <optional>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "rct/geometry.hpp"

namespace rct::kalman {

/// State layout: (x, y, vx, vy, w, h). Position is the box center; the
/// velocities are latent and never observed directly.
using StateVector = Eigen::Matrix<double, 6, 1>;
using StateMatrix = Eigen::Matrix<double, 6, 6>;
using MeasVector = Eigen::Matrix<double, 4, 1>;
using MeasMatrix = Eigen::Matrix<double, 4, 4>;
using ObsMatrix = Eigen::Matrix<double, 4, 6>;

enum Index { kX = 0, kY = 1, kVx = 2, kVy = 3, kW = 4, kH = 5 };

struct KalmanState {
  StateVector mean = StateVector::Zero();
  StateMatrix cov = StateMatrix::Identity();

  Point position() const { return {mean(kX), mean(kY)}; }
  Point velocity() const { return {mean(kVx), mean(kVy)}; }
  /// Box derived from the state mean (b^k in the tracker).
  Box box() const;
};

struct KalmanConfig {
  StateMatrix transition_cov;
  MeasMatrix observation_cov;
  StateMatrix initial_cov;

  /// transition diag(1,1,0.2,0.2,1,1), observation diag(0.5,...), identity prior.
  static KalmanConfig defaults();
  static KalmanConfig diagonal(double trans_pos, double trans_vel, double trans_size,
                               double obs_pos, double obs_size, double initial);
};

/// A box measurement, or nullopt for a missing observation.
using Observation = std::optional<Box>;

/// Constant-velocity transition for `steps` frames.
StateMatrix transition(int steps = 1);
const ObsMatrix& observation_matrix();
MeasVector measurement(const Box& b);

KalmanState init(const Box& b, const KalmanConfig& cfg);
KalmanState predict(const KalmanState& s, const KalmanConfig& cfg);
/// Throws std::invalid_argument on non-finite measurements.
KalmanState update(const KalmanState& s, const Observation& obs, const KalmanConfig& cfg);

/// Log density of the box measurement under the predictive distribution
/// N(H m, H P H^T + R). Throws std::domain_error if the innovation
/// covariance is not positive definite.
double log_likelihood(const KalmanState& s, const Box& b, const KalmanConfig& cfg);
double likelihood(const KalmanState& s, const Box& b, const KalmanConfig& cfg);

/// Log density of the box under a Gaussian centred on `mean_state`'s
/// predicted measurement but with `cov_state`'s innovation covariance.
/// Lets two states be compared on location alone.
double log_likelihood_shared(const KalmanState& mean_state, const KalmanState& cov_state,
                             const Box& b, const KalmanConfig& cfg);

/// Forward filtering result for one step.
struct FilterStep {
  KalmanState predicted;
  KalmanState filtered;
};

/// Runs the filter. The first step's prior is init(init_box); every index
/// (including the first) is then updated with its observation if present.
std::vector<FilterStep> filter(std::span<const Observation> obs, const Box& init_box,
                               const KalmanConfig& cfg);

/// Fixed-interval Rauch-Tung-Striebel smoother over the same model as
/// filter(). Missing slots receive inferred states.
std::vector<KalmanState> smooth(std::span<const Observation> obs, const Box& init_box,
                                const KalmanConfig& cfg);

/// Reverses the direction of time for a state (negates the velocities).
KalmanState time_reversed(const KalmanState& s);

}  // namespace rct::kalman
