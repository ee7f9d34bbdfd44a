#include "gflow/certify.hpp"

#include "gflow/spectral.hpp"
#include "gflow/util.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace gflow {

std::string_view to_string(CertStatus s) {
  switch (s) {
    case CertStatus::certified: return "certified";
    case CertStatus::refused_singular: return "refused_singular";
    case CertStatus::refused_violation: return "refused_violation";
    case CertStatus::refused_aborted: return "refused_aborted";
  }
  return "?";
}

ConvergenceCertificate certificate(const TrajectoryLog& log, double tol_rel, Coverage coverage, Provenance provenance) {
  if (!(tol_rel >= 0.0)) throw std::invalid_argument("certificate: tolerance must be non-negative");
  ConvergenceCertificate cert;
  cert.coverage = coverage;
  cert.tol_rel = tol_rel;
  cert.provenance = std::move(provenance);
  if (log.size() == 0 || log.aborted) {
    cert.status = CertStatus::refused_aborted;
    return cert;
  }
  cert.horizon = log.times.back();
  cert.init_residual = log.residual_norms.front();
  cert.init_loss = log.losses.front();

  double lo = log.lambda_mins.front(), hi = log.lambda_mins.front();
  bool finite = true;
  for (double l : log.lambda_mins) {
    finite = finite && std::isfinite(l);
    lo = std::min(lo, l);
    hi = std::max(hi, l);
  }
  cert.lambda0 = lo;
  if (!finite || !(lo > 0.0) || lo <= 1e-10 * hi) {
    cert.status = CertStatus::refused_singular;
    return cert;
  }

  const double factor = 1.0 + tol_rel + kRoundoffSlack;
  bool all = true;
  for (std::size_t i = 0; i < log.size(); ++i) {
    PointwiseCheck c;
    c.t = log.times[i];
    c.residual = log.residual_norms[i];
    c.envelope = std::exp(-cert.lambda0 * c.t) * cert.init_residual;
    c.loss = log.losses[i];
    c.loss_envelope = std::exp(-2.0 * cert.lambda0 * c.t) * cert.init_loss;
    c.pass = c.residual <= factor * c.envelope && c.loss <= factor * factor * c.loss_envelope;
    all = all && c.pass;
    cert.checks.push_back(c);
  }
  cert.status = all ? CertStatus::certified : CertStatus::refused_violation;
  return cert;
}

std::string format_certificate(const ConvergenceCertificate& cert) {
  std::string out = "# gradient-flow convergence certificate\n";
  auto kv = [&](std::string_view k, const std::string& v) {
    out += k;
    out += " = ";
    out += v;
    out += '\n';
  };
  kv("status", std::string(to_string(cert.status)));
  kv("coverage", std::string(to_string(cert.coverage)));
  kv("lambda0", format_double(cert.lambda0));
  kv("horizon", format_double(cert.horizon));
  kv("tol_rel", format_double(cert.tol_rel));
  kv("init_residual", format_double(cert.init_residual));
  kv("init_loss", format_double(cert.init_loss));
  kv("config_hash", cert.provenance.config_hash.empty() ? "-" : cert.provenance.config_hash);
  kv("dataset_digest", cert.provenance.dataset_digest.empty() ? "-" : cert.provenance.dataset_digest);
  kv("seed", std::to_string(cert.provenance.seed));
  kv("points", std::to_string(cert.checks.size()));
  out += "\n[pointwise]\nt,residual,envelope,loss,loss_envelope,pass\n";
  for (const auto& c : cert.checks) {
    out += format_double(c.t) + "," + format_double(c.residual) + "," + format_double(c.envelope) + "," +
           format_double(c.loss) + "," + format_double(c.loss_envelope) + "," + (c.pass ? "1" : "0") + "\n";
  }
  return out;
}

EnvelopeReport check_envelope(const TrajectoryLog& log, double lambda0, double tol_rel) {
  if (!(lambda0 >= 0.0)) throw std::invalid_argument("check_envelope: lambda0 must be non-negative");
  EnvelopeReport rep;
  for (std::size_t i = 0; i < log.size(); ++i)
    rep.weighted.push_back(std::exp(2.0 * lambda0 * log.times[i]) * log.residual_norms[i] * log.residual_norms[i]);
  const double factor = 1.0 + tol_rel + kRoundoffSlack;
  for (std::size_t i = 0; i + 1 < rep.weighted.size(); ++i) {
    const double a = rep.weighted[i], b = rep.weighted[i + 1];
    if (a > 0.0) rep.worst_growth = std::max(rep.worst_growth, b / a);
    if (!(b <= a * factor)) {
      if (rep.pass) rep.first_violation = i + 1;
      rep.pass = false;
    }
  }
  return rep;
}

DynamicsReport dynamics_residual_check(const Network& net, const TrajectoryLog& log, const Dataset& data,
                                       double stride) {
  if (log.thetas.size() != log.size() || log.size() < 3)
    throw std::invalid_argument("dynamics_residual_check: log has no parameter snapshots");
  if (!(stride > 0.0)) throw std::invalid_argument("dynamics_residual_check: stride must be positive");
  DynamicsReport rep;
  const StackedVector y = stacked_labels(data);
  for (std::size_t i = 1; i + 1 < log.size(); ++i) {
    const double t = log.times[i];
    const double k = t / stride;
    if (std::abs(k - std::round(k)) > 1e-6) continue;
    const auto find = [&](double target) -> std::ptrdiff_t {
      for (std::size_t j = 0; j < log.size(); ++j)
        if (std::abs(log.times[j] - target) <= 1e-9 * std::max(1.0, stride)) return static_cast<std::ptrdiff_t>(j);
      return -1;
    };
    const std::ptrdiff_t before = find(t - stride);
    const std::ptrdiff_t after = find(t + stride);
    if (before < 0 || after < 0) continue;
    const StackedVector f_before = stacked_predictions(net, log.thetas[static_cast<std::size_t>(before)], data);
    const StackedVector f_after = stacked_predictions(net, log.thetas[static_cast<std::size_t>(after)], data);
    const double span = log.times[static_cast<std::size_t>(after)] - log.times[static_cast<std::size_t>(before)];
    const StackedVector fd = (f_after - f_before) / span;
    const StackedVector r = y - stacked_predictions(net, log.thetas[i], data);
    const StackedVector rhs = ntk_gram(net, log.thetas[i], data) * r;
    const double denom = rhs.norm();
    const double diff = (fd - rhs).norm();
    const double dev = denom > 0.0 ? diff / denom : (diff == 0.0 ? 0.0 : INFINITY);
    rep.times.push_back(t);
    rep.deviations.push_back(dev);
    rep.max_relative_deviation = std::max(rep.max_relative_deviation, dev);
  }
  if (rep.times.empty()) throw std::invalid_argument("dynamics_residual_check: no interior time has neighbours one stride away");
  return rep;
}

}  // namespace gflow
