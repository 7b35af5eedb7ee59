#include "gasflow/monte_carlo.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <numeric>

#include <json.hpp>
#include <omp.h>

#include "gasflow/network_io.hpp"

namespace gasflow {

namespace {

using json = nlohmann::json;

bool same(double a, double b) { return (std::isnan(a) && std::isnan(b)) || a == b; }

SolveStatus status_from_string(const std::string& s) {
  for (SolveStatus st : {SolveStatus::Solved, SolveStatus::Infeasible, SolveStatus::Inexact,
                         SolveStatus::Timeout})
    if (s == to_string(st)) return st;
  throw GasFlowError(ErrorCode::Schema, "report: unknown status '" + s + "'");
}

SampleRecord solve_sample(const GasNetwork& net, const McConfig& cfg, std::size_t id) {
  Rng rng = Rng::stream(cfg.seed, id);
  const Injections q = perturb_injections(cfg.q0, cfg.sigma, cfg.balancing, rng);
  const auto t0 = std::chrono::steady_clock::now();
  SolveResult r = solve_gf(net, q, cfg.solver);
  const double ms =
      std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();

  SampleRecord rec;
  rec.id = id;
  rec.status = r.status;
  rec.nodes = r.stats.nodes_explored;
  rec.runtime_ms = cfg.record_timing ? ms : 0.0;
  if (rec.feasible()) {
    rec.gap = r.gap;
    rec.objective = r.objective;
    rec.inexact_minor = r.inexact_minor;
  }
  if (r.status == SolveStatus::Infeasible && r.infeasibility) {
    rec.certificate = r.infeasibility->at_root ? "root" : "tree";
    rec.certificate_nodes = r.infeasibility->nodes.size();
    rec.certificate_residual = r.infeasibility->max_residual();
  }
  return rec;
}

McReport assemble(std::vector<SampleRecord> records) {
  McReport rep;
  rep.records = std::move(records);
  rep.aggregates = aggregate(rep.records);
  for (const SampleRecord& r : rep.records) {
    if (r.feasible()) rep.ranked_gap.push_back(r.gap);
    rep.runtime_ms.push_back(r.runtime_ms);
  }
  std::sort(rep.ranked_gap.begin(), rep.ranked_gap.end());
  return rep;
}

double quantile(const std::vector<double>& sorted, double p) {
  const double pos = p * double(sorted.size() - 1);
  const std::size_t lo = std::size_t(std::floor(pos));
  const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
  return sorted[lo] + (pos - double(lo)) * (sorted[hi] - sorted[lo]);
}

json num(double v) { return std::isnan(v) ? json(nullptr) : json(v); }
double get_num(const json& j) {
  return j.is_null() ? std::numeric_limits<double>::quiet_NaN() : j.get<double>();
}
template <class T>
json opt(const std::optional<T>& v) {
  return v ? json(*v) : json(nullptr);
}
std::optional<double> get_opt(const json& j) {
  if (j.is_null()) return std::nullopt;
  return j.get<double>();
}

std::string fmt(double v) {
  if (std::isnan(v)) return "";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace

bool SampleRecord::operator==(const SampleRecord& o) const {
  return id == o.id && status == o.status && same(gap, o.gap) && same(objective, o.objective) &&
         same(runtime_ms, o.runtime_ms) && inexact_minor == o.inexact_minor && nodes == o.nodes &&
         certificate == o.certificate && certificate_nodes == o.certificate_nodes &&
         same(certificate_residual, o.certificate_residual);
}

Injections perturb_injections(const Injections& q0, double sigma, NodeId balancing, Rng& rng) {
  if (balancing >= q0.q.size())
    throw GasFlowError(ErrorCode::InvalidArgument, "perturb_injections: balancing node out of range");
  if (!(sigma >= 0.0)) throw GasFlowError(ErrorCode::InvalidArgument, "perturb_injections: sigma < 0");
  Injections q = q0;
  double sum = 0.0;
  for (std::size_t i = 0; i < q.q.size(); ++i) {
    if (i == balancing) continue;
    q.q[i] += sigma * rng.normal();
    sum += q.q[i];
  }
  q.q[balancing] = -sum;
  return q;
}

McAggregates aggregate(const std::vector<SampleRecord>& records) {
  McAggregates a;
  a.samples = records.size();
  std::vector<double> gaps, times;
  for (const SampleRecord& r : records) {
    switch (r.status) {
      case SolveStatus::Solved: ++a.solved; break;
      case SolveStatus::Inexact: ++a.inexact; break;
      case SolveStatus::Infeasible: ++a.infeasible; break;
      case SolveStatus::Timeout: ++a.timeout; break;
    }
    if (r.feasible()) {
      gaps.push_back(r.gap);
      times.push_back(r.runtime_ms);
    }
  }
  a.feasible = gaps.size();
  if (gaps.empty()) return a;
  std::sort(gaps.begin(), gaps.end());
  std::sort(times.begin(), times.end());
  a.gap = GapQuantiles{gaps.front(), quantile(gaps, 0.25), quantile(gaps, 0.5),
                       quantile(gaps, 0.75), quantile(gaps, 0.95), gaps.back()};
  const double n = double(gaps.size());
  a.frac_below_1e4 = double(std::count_if(gaps.begin(), gaps.end(), [](double g) { return g < 1e-4; })) / n;
  a.frac_below_1e3 = double(std::count_if(gaps.begin(), gaps.end(), [](double g) { return g < 1e-3; })) / n;
  a.mean_runtime_ms = std::accumulate(times.begin(), times.end(), 0.0) / n;
  a.median_runtime_ms = quantile(times, 0.5);
  return a;
}

McReport run_monte_carlo(const GasNetwork& net, const McConfig& cfg) {
  std::vector<SampleRecord> records(cfg.n_samples);
  const long n = long(cfg.n_samples);
  const int threads = cfg.jobs > 0 ? cfg.jobs : omp_get_max_threads();
#pragma omp parallel for schedule(dynamic, 1) num_threads(threads)
  for (long i = 0; i < n; ++i) records[std::size_t(i)] = solve_sample(net, cfg, std::size_t(i));
  return assemble(std::move(records));
}

McReport run_monte_carlo_serial(const GasNetwork& net, const McConfig& cfg) {
  std::vector<SampleRecord> records;
  records.reserve(cfg.n_samples);
  for (std::size_t i = 0; i < cfg.n_samples; ++i) records.push_back(solve_sample(net, cfg, i));
  return assemble(std::move(records));
}

std::string report_csv(const McReport& report) {
  std::string out = "sample_id,status,gap,objective,runtime_ms\n";
  for (const SampleRecord& r : report.records) {
    out += std::to_string(r.id) + ',' + to_string(r.status) + ',' + fmt(r.gap) + ',' +
           fmt(r.objective) + ',' + fmt(r.runtime_ms) + '\n';
  }
  return out;
}

std::string report_json(const McReport& report) {
  json j;
  j["format_version"] = kFormatVersion;
  json recs = json::array();
  for (const SampleRecord& r : report.records) {
    json x{{"sample_id", r.id},
           {"status", to_string(r.status)},
           {"gap", num(r.gap)},
           {"objective", num(r.objective)},
           {"runtime_ms", r.runtime_ms},
           {"inexact_minor", r.inexact_minor},
           {"nodes", r.nodes}};
    if (!r.certificate.empty())
      x["certificate"] = {{"kind", r.certificate},
                          {"nodes", r.certificate_nodes},
                          {"residual", r.certificate_residual}};
    recs.push_back(std::move(x));
  }
  j["records"] = std::move(recs);
  const McAggregates& a = report.aggregates;
  json agg{{"samples", a.samples},       {"feasible", a.feasible},
           {"solved", a.solved},         {"inexact", a.inexact},
           {"infeasible", a.infeasible}, {"timeout", a.timeout},
           {"frac_below_1e-4", opt(a.frac_below_1e4)},
           {"frac_below_1e-3", opt(a.frac_below_1e3)},
           {"mean_runtime_ms", opt(a.mean_runtime_ms)},
           {"median_runtime_ms", opt(a.median_runtime_ms)}};
  if (a.gap)
    agg["gap_quantiles"] = {{"min", a.gap->min},       {"q25", a.gap->q25}, {"median", a.gap->median},
                            {"q75", a.gap->q75},       {"q95", a.gap->q95}, {"max", a.gap->max}};
  else
    agg["gap_quantiles"] = nullptr;
  j["aggregates"] = std::move(agg);
  j["ranked_gap"] = report.ranked_gap;
  j["runtime_ms"] = report.runtime_ms;
  return j.dump(2) + "\n";
}

McReport report_from_json(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw GasFlowError(ErrorCode::Parse, std::string("report: ") + e.what());
  }
  try {
    McReport rep;
    for (const json& x : j.at("records")) {
      SampleRecord r;
      r.id = x.at("sample_id").get<std::size_t>();
      r.status = status_from_string(x.at("status").get<std::string>());
      r.gap = get_num(x.at("gap"));
      r.objective = get_num(x.at("objective"));
      r.runtime_ms = x.at("runtime_ms").get<double>();
      r.inexact_minor = x.at("inexact_minor").get<bool>();
      r.nodes = x.at("nodes").get<std::size_t>();
      if (x.contains("certificate")) {
        const json& c = x["certificate"];
        r.certificate = c.at("kind").get<std::string>();
        r.certificate_nodes = c.at("nodes").get<std::size_t>();
        r.certificate_residual = c.at("residual").get<double>();
      }
      rep.records.push_back(std::move(r));
    }
    const json& a = j.at("aggregates");
    McAggregates& g = rep.aggregates;
    g.samples = a.at("samples").get<std::size_t>();
    g.feasible = a.at("feasible").get<std::size_t>();
    g.solved = a.at("solved").get<std::size_t>();
    g.inexact = a.at("inexact").get<std::size_t>();
    g.infeasible = a.at("infeasible").get<std::size_t>();
    g.timeout = a.at("timeout").get<std::size_t>();
    g.frac_below_1e4 = get_opt(a.at("frac_below_1e-4"));
    g.frac_below_1e3 = get_opt(a.at("frac_below_1e-3"));
    g.mean_runtime_ms = get_opt(a.at("mean_runtime_ms"));
    g.median_runtime_ms = get_opt(a.at("median_runtime_ms"));
    const json& q = a.at("gap_quantiles");
    if (!q.is_null())
      g.gap = GapQuantiles{q.at("min").get<double>(), q.at("q25").get<double>(),
                           q.at("median").get<double>(), q.at("q75").get<double>(),
                           q.at("q95").get<double>(), q.at("max").get<double>()};
    rep.ranked_gap = j.at("ranked_gap").get<std::vector<double>>();
    rep.runtime_ms = j.at("runtime_ms").get<std::vector<double>>();
    return rep;
  } catch (const json::exception& e) {
    throw GasFlowError(ErrorCode::Schema, std::string("report: ") + e.what());
  }
}

void emit_report(const McReport& report, ReportFormat format, const std::filesystem::path& path) {
  write_text_file(path, format == ReportFormat::Csv ? report_csv(report) : report_json(report));
}

}  // namespace gasflow
