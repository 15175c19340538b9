#include "protocols.hpp"

#include <nlohmann/json.hpp>

#include <cmath>

#include "games.hpp"

namespace heterodyn {

namespace {

using nlohmann::json;

double pos(double q) { return q > 0.0 ? q : 0.0; }

}  // namespace

ProtocolSpec ProtocolSpec::smith() {
  ProtocolSpec p;
  p.kind_ = Kind::Smith;
  return p;
}

ProtocolSpec ProtocolSpec::pairwise(Gain gain) {
  ProtocolSpec p;
  p.kind_ = Kind::PairwiseComparison;
  p.gain_ = gain;
  return p;
}

ProtocolSpec ProtocolSpec::logit(double mu) {
  if (!(mu > 0.0))
    throw std::invalid_argument("logit: noise level mu must be positive");
  ProtocolSpec p;
  p.kind_ = Kind::Logit;
  p.mu_ = mu;
  return p;
}

ProtocolSpec ProtocolSpec::bnn() {
  ProtocolSpec p;
  p.kind_ = Kind::Bnn;
  return p;
}

ProtocolSpec ProtocolSpec::replicator_pairwise() {
  ProtocolSpec p;
  p.kind_ = Kind::ReplicatorPairwise;
  return p;
}

ProtocolSpec ProtocolSpec::replicator_dissatisfaction(double pi_bar) {
  if (!std::isfinite(pi_bar))
    throw std::invalid_argument("replicator_dissatisfaction: pi_bar must be finite");
  ProtocolSpec p;
  p.kind_ = Kind::ReplicatorDissatisfaction;
  p.pi_bar_ = pi_bar;
  return p;
}

ProtocolSpec ProtocolSpec::replicator_success(double pi_low) {
  if (!std::isfinite(pi_low))
    throw std::invalid_argument("replicator_success: pi_low must be finite");
  ProtocolSpec p;
  p.kind_ = Kind::ReplicatorSuccess;
  p.pi_low_ = pi_low;
  return p;
}

ProtocolSpec ProtocolSpec::standard_brd() {
  ProtocolSpec p;
  p.kind_ = Kind::StandardBrd;
  return p;
}

ProtocolSpec ProtocolSpec::tempered_brd(Temper temper, double scale) {
  if (!(scale > 0.0))
    throw std::invalid_argument("tempered_brd: scale must be positive");
  ProtocolSpec p;
  p.kind_ = Kind::TemperedBrd;
  p.temper_ = temper;
  p.temper_scale_ = scale;
  // A tempering function maps [0, inf) into [0, 1] with Q(0) = 0 and
  // Q(q) > 0 for q > 0; checked on sample points.
  if (p.temper_fn(0.0) != 0.0)
    throw std::invalid_argument("tempered_brd: Q(0) must be 0");
  for (double q : {1e-9, 1e-3, 0.5, 1.0, 5.0, 1e3}) {
    double value = p.temper_fn(q);
    if (!(value > 0.0) || value > 1.0)
      throw std::invalid_argument("tempered_brd: Q must map positive gaps into (0, 1]");
  }
  return p;
}

double ProtocolSpec::temper_fn(double q) const {
  switch (temper_) {
    case Temper::LinearCap:
      return std::min(q / temper_scale_, 1.0);
    case Temper::ExpCdf:
      return 1.0 - std::exp(-q / temper_scale_);
  }
  return 0.0;
}

std::string ProtocolSpec::describe() const {
  switch (kind_) {
    case Kind::Smith:
      return "smith";
    case Kind::PairwiseComparison:
      return gain_ == Gain::Pos ? "pairwise(gain=pos)" : "pairwise(gain=pos_sq)";
    case Kind::Logit:
      return "logit(mu=" + std::to_string(mu_) + ")";
    case Kind::Bnn:
      return "bnn";
    case Kind::ReplicatorPairwise:
      return "replicator_pairwise";
    case Kind::ReplicatorDissatisfaction:
      return "replicator_dissatisfaction(pi_bar=" + std::to_string(pi_bar_) + ")";
    case Kind::ReplicatorSuccess:
      return "replicator_success(pi_low=" + std::to_string(pi_low_) + ")";
    case Kind::StandardBrd:
      return "standard_brd";
    case Kind::TemperedBrd:
      return std::string("tempered_brd(temper=") +
             (temper_ == Temper::LinearCap ? "linear_cap" : "exp_cdf") +
             ",scale=" + std::to_string(temper_scale_) + ")";
  }
  return "?";
}

void switch_rates_into(Matrix& rho, const ProtocolSpec& protocol,
                       const Vector& payoffs, const Vector& x_obs, double tie_tol) {
  const int n = static_cast<int>(payoffs.size());
  if (!payoffs.allFinite())
    throw std::invalid_argument("switch_rates: non-finite payoffs");
  rho.setZero(n, n);
  switch (protocol.kind()) {
    case ProtocolSpec::Kind::Smith: {
      for (int s = 0; s < n; ++s)
        for (int t = 0; t < n; ++t)
          if (t != s) rho(s, t) = pos(payoffs(t) - payoffs(s));
      break;
    }
    case ProtocolSpec::Kind::PairwiseComparison: {
      bool square = protocol.gain() == ProtocolSpec::Gain::PosSq;
      for (int s = 0; s < n; ++s)
        for (int t = 0; t < n; ++t)
          if (t != s) {
            double q = pos(payoffs(t) - payoffs(s));
            rho(s, t) = square ? q * q : q;
          }
      break;
    }
    case ProtocolSpec::Kind::Logit: {
      double mu = protocol.mu();
      double top = payoffs.maxCoeff();
      Vector weights = ((payoffs.array() - top) / mu).exp();
      weights /= weights.sum();
      for (int s = 0; s < n; ++s)
        for (int t = 0; t < n; ++t)
          if (t != s) rho(s, t) = weights(t);
      break;
    }
    case ProtocolSpec::Kind::Bnn: {
      double mean = x_obs.dot(payoffs);
      for (int t = 0; t < n; ++t) {
        double excess = pos(payoffs(t) - mean);
        for (int s = 0; s < n; ++s)
          if (t != s) rho(s, t) = excess;
      }
      break;
    }
    case ProtocolSpec::Kind::ReplicatorPairwise: {
      for (int s = 0; s < n; ++s)
        for (int t = 0; t < n; ++t)
          if (t != s) rho(s, t) = x_obs(t) * pos(payoffs(t) - payoffs(s));
      break;
    }
    case ProtocolSpec::Kind::ReplicatorDissatisfaction: {
      // Switch away from s at the dissatisfaction rate [pi_bar - pi_s]+,
      // landing on strategies in proportion to their observed shares.
      for (int s = 0; s < n; ++s) {
        double rate = pos(protocol.pi_bar() - payoffs(s));
        for (int t = 0; t < n; ++t)
          if (t != s) rho(s, t) = x_obs(t) * rate;
      }
      break;
    }
    case ProtocolSpec::Kind::ReplicatorSuccess: {
      // Imitate observed strategies in proportion to their success above a
      // floor payoff: rate [pi_t - pi_low]+ times the observed share.
      for (int t = 0; t < n; ++t) {
        double rate = pos(payoffs(t) - protocol.pi_low());
        for (int s = 0; s < n; ++s)
          if (t != s) rho(s, t) = x_obs(t) * rate;
      }
      break;
    }
    case ProtocolSpec::Kind::StandardBrd: {
      int br = br_designated(payoffs, tie_tol);
      for (int s = 0; s < n; ++s)
        if (s != br) rho(s, br) = 1.0;
      break;
    }
    case ProtocolSpec::Kind::TemperedBrd: {
      int br = br_designated(payoffs, tie_tol);
      for (int s = 0; s < n; ++s)
        if (s != br) rho(s, br) = protocol.temper_fn(pos(payoffs(br) - payoffs(s)));
      break;
    }
  }
}

Matrix switch_rates(const ProtocolSpec& protocol, const Vector& payoffs,
                    const Vector& x_obs, double tie_tol) {
  Matrix rho;
  switch_rates_into(rho, protocol, payoffs, x_obs, tie_tol);
  return rho;
}

void mean_dynamic_into(Vector& v, Matrix& scratch, const ProtocolSpec& protocol,
                       const Vector& payoffs, const Vector& x, const Vector& x_obs,
                       double tie_tol, double* max_rate) {
  const int n = static_cast<int>(payoffs.size());
  switch_rates_into(scratch, protocol, payoffs, x_obs, tie_tol);
  v.resize(n);
  for (int s = 0; s < n; ++s) {
    double inflow = 0.0, outflow = 0.0;
    for (int t = 0; t < n; ++t) {
      if (t == s) continue;
      inflow += x(t) * scratch(t, s);
      outflow += scratch(s, t);
      if (max_rate && scratch(s, t) > *max_rate) *max_rate = scratch(s, t);
    }
    v(s) = inflow - x(s) * outflow;
  }
}

Vector mean_dynamic(const ProtocolSpec& protocol, const Vector& payoffs,
                    const Vector& x, double tie_tol) {
  Vector v;
  Matrix scratch;
  mean_dynamic_into(v, scratch, protocol, payoffs, x, x, tie_tol, nullptr);
  return v;
}

ProtocolSpec ProtocolSpec::from_json(const json& j) {
  std::string type = j.at("type").get<std::string>();
  if (type == "smith") return smith();
  if (type == "pairwise") {
    std::string gain = j.value("gain", "pos");
    if (gain == "pos") return pairwise(Gain::Pos);
    if (gain == "pos_sq") return pairwise(Gain::PosSq);
    throw std::invalid_argument("protocol: unknown pairwise gain \"" + gain + "\"");
  }
  if (type == "logit") return logit(j.at("mu").get<double>());
  if (type == "bnn") return bnn();
  if (type == "replicator_pairwise") return replicator_pairwise();
  if (type == "replicator_dissatisfaction")
    return replicator_dissatisfaction(j.at("pi_bar").get<double>());
  if (type == "replicator_success")
    return replicator_success(j.at("pi_low").get<double>());
  if (type == "brd") return standard_brd();
  if (type == "tempered_brd") {
    std::string temper = j.value("temper", "linear_cap");
    double scale = j.value("scale", 1.0);
    if (temper == "linear_cap") return tempered_brd(Temper::LinearCap, scale);
    if (temper == "exp_cdf") return tempered_brd(Temper::ExpCdf, scale);
    throw std::invalid_argument("protocol: unknown tempering function \"" + temper + "\"");
  }
  throw std::invalid_argument("protocol: unknown type \"" + type + "\"");
}

json ProtocolSpec::to_json() const {
  json j;
  switch (kind_) {
    case Kind::Smith: j["type"] = "smith"; break;
    case Kind::PairwiseComparison:
      j["type"] = "pairwise";
      j["gain"] = gain_ == Gain::Pos ? "pos" : "pos_sq";
      break;
    case Kind::Logit: j["type"] = "logit"; j["mu"] = mu_; break;
    case Kind::Bnn: j["type"] = "bnn"; break;
    case Kind::ReplicatorPairwise: j["type"] = "replicator_pairwise"; break;
    case Kind::ReplicatorDissatisfaction:
      j["type"] = "replicator_dissatisfaction";
      j["pi_bar"] = pi_bar_;
      break;
    case Kind::ReplicatorSuccess:
      j["type"] = "replicator_success";
      j["pi_low"] = pi_low_;
      break;
    case Kind::StandardBrd: j["type"] = "brd"; break;
    case Kind::TemperedBrd:
      j["type"] = "tempered_brd";
      j["temper"] = temper_ == Temper::LinearCap ? "linear_cap" : "exp_cdf";
      j["scale"] = temper_scale_;
      break;
  }
  return j;
}

AssignmentRule AssignmentRule::from_json(const json& j) {
  AssignmentRule r;
  std::string type = j.at("type").get<std::string>();
  if (type == "uniform") {
    r.kind = Kind::Uniform;
    r.protocol = j.value("protocol", 0);
  } else if (type == "by_node") {
    r.kind = Kind::ByNode;
    r.node_list = j.at("protocols").get<std::vector<int>>();
  } else if (type == "threshold") {
    r.kind = Kind::Threshold;
    r.coord = j.value("coord", 0);
    r.cutoff = j.at("cutoff").get<double>();
    r.below = j.at("below").get<int>();
    r.otherwise = j.at("otherwise").get<int>();
  } else {
    throw std::invalid_argument("assignment: unknown type \"" + type + "\"");
  }
  return r;
}

json AssignmentRule::to_json() const {
  json j;
  switch (kind) {
    case Kind::Uniform:
      j["type"] = "uniform";
      j["protocol"] = protocol;
      break;
    case Kind::ByNode:
      j["type"] = "by_node";
      j["protocols"] = node_list;
      break;
    case Kind::Threshold:
      j["type"] = "threshold";
      j["coord"] = coord;
      j["cutoff"] = cutoff;
      j["below"] = below;
      j["otherwise"] = otherwise;
      break;
  }
  return j;
}

ProtocolAssignment assign_protocols(const TypeGrid& grid, const AssignmentRule& rule,
                                    std::vector<ProtocolSpec> protocols) {
  if (protocols.empty())
    throw std::invalid_argument("assign_protocols: empty protocol list");
  const int n_protocols = static_cast<int>(protocols.size());
  const int k = grid.size();
  ProtocolAssignment out;
  out.protocols = std::move(protocols);
  out.node_protocol.resize(static_cast<size_t>(k));
  auto check = [&](int idx) {
    if (idx < 0 || idx >= n_protocols)
      throw std::invalid_argument("assign_protocols: protocol index out of range");
    return idx;
  };
  switch (rule.kind) {
    case AssignmentRule::Kind::Uniform: {
      int idx = check(rule.protocol);
      std::fill(out.node_protocol.begin(), out.node_protocol.end(), idx);
      break;
    }
    case AssignmentRule::Kind::ByNode: {
      if (static_cast<int>(rule.node_list.size()) != k)
        throw std::invalid_argument("assign_protocols: by_node list must have one entry per node");
      for (int i = 0; i < k; ++i)
        out.node_protocol[static_cast<size_t>(i)] = check(rule.node_list[static_cast<size_t>(i)]);
      break;
    }
    case AssignmentRule::Kind::Threshold: {
      if (rule.coord < 0 || rule.coord >= grid.dim())
        throw std::invalid_argument("assign_protocols: threshold coordinate out of range");
      int below = check(rule.below);
      int otherwise = check(rule.otherwise);
      for (int i = 0; i < k; ++i)
        out.node_protocol[static_cast<size_t>(i)] =
            grid.nodes()(i, rule.coord) < rule.cutoff ? below : otherwise;
      break;
    }
  }
  return out;
}

}  // namespace heterodyn
