#pragma once

#include "gflow/activation.hpp"
#include "gflow/data.hpp"
#include "gflow/flow.hpp"
#include "gflow/network.hpp"

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace gflow {

enum class CertStatus { certified, refused_singular, refused_violation, refused_aborted };

std::string_view to_string(CertStatus s);

// Added to every tolerance so that an exactly tight envelope (closed-form
// runs) is not refused over the last few ulps of integrator error.
inline constexpr double kRoundoffSlack = 1e-9;

struct PointwiseCheck {
  double t = 0.0;
  double residual = 0.0;        // ||y - F_t||
  double envelope = 0.0;        // exp(-lambda0 t) ||y - F_0||
  double loss = 0.0;            // L(theta(t))
  double loss_envelope = 0.0;   // exp(-2 lambda0 t) L(theta(0))
  bool pass = false;
};

// What the certificate was computed from, so it can be re-checked later.
struct Provenance {
  std::string config_hash;
  std::string dataset_digest;
  std::uint64_t seed = 0;
};

struct ConvergenceCertificate {
  CertStatus status = CertStatus::refused_aborted;
  Coverage coverage = Coverage::theorem2;
  double lambda0 = 0.0;
  double horizon = 0.0;
  double tol_rel = 0.0;
  double init_residual = 0.0;
  double init_loss = 0.0;
  Provenance provenance;
  std::vector<PointwiseCheck> checks;
};

// lambda0 is the minimum logged lambda_min. Refuses when the log is empty or
// aborted, when lambda0 <= 1e-10 * max logged lambda_min, or when any logged
// state violates ||y - F_t|| <= (1 + tol) exp(-lambda0 t) ||y - F_0|| or the
// matching loss bound.
ConvergenceCertificate certificate(const TrajectoryLog& log, double tol_rel = 1e-3,
                                   Coverage coverage = Coverage::theorem2, Provenance provenance = {});

// Key-value block followed by the pointwise table. Byte-stable.
std::string format_certificate(const ConvergenceCertificate& cert);

struct EnvelopeReport {
  std::vector<double> weighted;  // exp(2 lambda0 t) ||y - F_t||^2
  bool pass = true;
  std::size_t first_violation = 0;
  double worst_growth = 0.0;  // max weighted[i+1] / weighted[i]
};

// The weighted residual must be non-increasing between consecutive logged
// states, within a factor (1 + tol_rel).
EnvelopeReport check_envelope(const TrajectoryLog& log, double lambda0, double tol_rel);

struct DynamicsReport {
  std::vector<double> times;
  std::vector<double> deviations;
  double max_relative_deviation = 0.0;
};

// At logged times that are multiples of stride (with a neighbour stride away
// on each side), compares the centred difference of F_t against G(t)(y - F_t).
DynamicsReport dynamics_residual_check(const Network& net, const TrajectoryLog& log, const Dataset& data,
                                       double stride);

}  // namespace gflow
