#include "gflow/experiment.hpp"

#include "gflow/plot.hpp"
#include "gflow/util.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <exception>
#include <filesystem>
#include <iostream>
#include <mutex>
#include <sstream>

namespace fs = std::filesystem;

namespace gflow {

namespace {

struct Job {
  std::size_t point;
  std::uint64_t seed;
};

std::string meta_line(const std::string& k, const std::string& v) { return k + " = " + v + "\n"; }

std::string read_if_exists(const fs::path& p) {
  std::error_code ec;
  if (!fs::exists(p, ec)) return {};
  return read_file(p.string());
}

std::vector<fs::path> run_dirs(const std::string& dir) {
  std::vector<fs::path> out;
  const fs::path root(dir);
  if (!fs::is_directory(root)) throw std::runtime_error("not a directory: " + dir);
  if (fs::exists(root / "run.meta")) return {root};
  for (const auto& entry : fs::directory_iterator(root))
    if (entry.is_directory() && fs::exists(entry.path() / "run.meta")) out.push_back(entry.path());
  std::sort(out.begin(), out.end());
  if (out.empty()) throw std::runtime_error("no run artifacts (run.meta) under " + dir);
  return out;
}

}  // namespace

std::map<std::string, std::string> parse_key_values(const std::string& text) {
  std::map<std::string, std::string> out;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) break;
    if (line[0] == '#') continue;
    const auto eq = line.find(" = ");
    if (eq == std::string::npos) continue;
    out[line.substr(0, eq)] = line.substr(eq + 3);
  }
  return out;
}

std::string resolve_output_dir(const ExperimentConfig& cfg) {
  fs::path out(cfg.output_dir);
  if (const char* root = std::getenv(kOutputRootEnv); root && *root && out.is_relative()) out = fs::path(root) / out;
  return out.string();
}

Dataset prepare_dataset(const ExperimentConfig& cfg) {
  Dataset points;
  if (!cfg.data.path.empty()) {
    fs::path p(cfg.data.path);
    if (p.is_relative()) p = fs::path(cfg.base_dir) / p;
    points = load_dataset(p.string());
    if (has_duplicate_inputs(points))
      std::cerr << "warning: dataset " << p.string()
                << " contains duplicate inputs; the Gram matrix will be singular\n";
  } else {
    points = gen_synthetic(cfg.data.n, cfg.data.N, cfg.data.M, cfg.data.radius, cfg.data.label_std, cfg.data.seed);
  }
  if (cfg.layers.front().kind == LayerKind::gcn) {
    auto graph = std::make_shared<const Graph>(knn_graph(points.inputs, *cfg.knn_k));
    return as_graph_example(points, std::move(graph));
  }
  return points;
}

Network build_network_for(const ExperimentConfig& cfg, const SweepPoint& point, const Dataset& data) {
  std::vector<LayerSpec> specs;
  const bool gcn = point.layers.front().kind == LayerKind::gcn;
  const std::size_t rows = gcn ? data.graph->vertex_count() : 1;
  std::size_t width = data.input_dim() / rows;
  for (const auto& e : point.layers) {
    LayerSpec s;
    s.kind = e.kind;
    s.in_width = width;
    s.out_width = e.width == 0 ? width : e.width;
    s.bias = e.bias;
    if (gcn) s.graph = data.graph;
    specs.push_back(s);
    width = s.out_width;
  }
  return Network::build(std::move(specs), builtin(cfg.activation, cfg.activation_params));
}

ExperimentResult run_experiment(const ExperimentConfig& cfg) {
  ExperimentResult result;
  result.output_dir = resolve_output_dir(cfg);
  const fs::path out(result.output_dir);
  std::error_code ec;
  fs::create_directories(out, ec);
  if (ec || !fs::is_directory(out)) throw std::runtime_error("cannot create output directory " + out.string());

  const Dataset data = prepare_dataset(cfg);
  const std::string config_hash = hex_digest(cfg.source_text);
  const std::string digest = dataset_digest(data);
  write_file((out / "config.toml").string(), cfg.source_text);
  save_dataset(data, (out / "dataset.csv").string());
  if (data.graph) save_graph(*data.graph, (out / "graph.csv").string());

  const auto points = sweep_points(cfg);
  std::vector<Network> nets;
  for (const auto& p : points) nets.push_back(build_network_for(cfg, p, data));

  std::vector<Job> jobs;
  for (std::size_t i = 0; i < points.size(); ++i)
    for (std::uint64_t s : cfg.seeds) jobs.push_back({i, s});
  result.runs.resize(jobs.size());

  std::exception_ptr error;
  std::mutex error_mutex;
#pragma omp parallel for schedule(dynamic, 1)
  for (std::size_t j = 0; j < jobs.size(); ++j) {
    try {
      const Job& job = jobs[j];
      const Network& net = nets[job.point];
      RunRecord& rec = result.runs[j];
      rec.id = points[job.point].label + "_seed" + std::to_string(job.seed);
      rec.point = points[job.point].label;
      rec.seed = job.seed;
      rec.params = net.param_count();
      rec.constraints = data.size() * net.output_size();

      const ParamVector theta0 = init_params(net, job.seed);
      FlowConfig flow = cfg.flow;
      flow.keep_thetas = cfg.save_thetas;
      const TrajectoryLog log = integrate(net, theta0, data, flow);
      const Coverage coverage = net.activation().coverage();
      const auto cert = certificate(log, cfg.tol_rel, coverage, Provenance{config_hash, digest, job.seed});

      rec.lambda0 = cert.lambda0;
      rec.status = cert.status;
      rec.aborted = log.aborted;
      if (log.size() > 0) {
        rec.initial_loss = log.losses.front();
        rec.final_loss = log.losses.back();
      }
      if (log.size() >= 2) {
        rec.blowup_pass = blowup_bound_check(log).pass;
        rec.monotone_pass = loss_monotonicity_check(log).pass;
      }

      const fs::path dir = out / rec.id;
      fs::create_directories(dir);
      write_file((dir / "trajectory.csv").string(), format_trajectory_csv(log));
      write_file((dir / "certificate.txt").string(), format_certificate(cert));
      if (cfg.save_thetas) write_file((dir / "thetas.txt").string(), format_thetas(log));
      std::string events = "t,layer,unit,example\n";
      for (const auto& e : log.events)
        events += format_double(e.time) + "," + std::to_string(e.layer) + "," + std::to_string(e.unit) + "," +
                  std::to_string(e.example) + "\n";
      write_file((dir / "events.csv").string(), events);

      std::string meta = "# run metadata\n";
      meta += meta_line("id", rec.id);
      meta += meta_line("point", rec.point);
      meta += meta_line("seed", std::to_string(job.seed));
      meta += meta_line("params", std::to_string(rec.params));
      meta += meta_line("constraints", std::to_string(rec.constraints));
      meta += meta_line("activation", net.activation().label());
      meta += meta_line("coverage", std::string(to_string(coverage)));
      meta += meta_line("first_layer", std::string(to_string(net.layers().front().kind)));
      meta += meta_line("scheme", std::string(to_string(flow.scheme)));
      meta += meta_line("step", format_double(flow.step));
      meta += meta_line("horizon", format_double(flow.horizon));
      meta += meta_line("tol_rel", format_double(cfg.tol_rel));
      meta += meta_line("config_hash", config_hash);
      meta += meta_line("dataset_digest", digest);
      meta += meta_line("aborted", log.aborted ? "1" : "0");
      meta += meta_line("abort_reason", log.abort_reason.empty() ? "-" : log.abort_reason);
      meta += meta_line("plot_drop_initial", cfg.drop_initial_percent_in_plots ? "1" : "0");
      write_file((dir / "run.meta").string(), meta);
    } catch (...) {
      std::lock_guard lock(error_mutex);
      if (!error) error = std::current_exception();
    }
  }
  if (error) std::rethrow_exception(error);

  std::string summary = "run,point,seed,P,nM,overparametrized,lambda0,status,initial_loss,final_loss,blowup_check,loss_monotone\n";
  for (const auto& r : result.runs) {
    summary += r.id + "," + r.point + "," + std::to_string(r.seed) + "," + std::to_string(r.params) + "," +
               std::to_string(r.constraints) + "," + (r.overparametrized() ? "1" : "0") + "," +
               format_double(r.lambda0) + "," + std::string(to_string(r.status)) + "," +
               format_double(r.initial_loss) + "," + format_double(r.final_loss) + "," +
               (r.blowup_pass ? "pass" : "fail") + "," + (r.monotone_pass ? "pass" : "fail") + "\n";
    if (r.overparametrized() && r.status != CertStatus::certified) result.exit_code = 2;
  }
  write_file((out / "summary.csv").string(), summary);
  return result;
}

std::vector<std::string> gen_data(const ExperimentConfig& cfg) {
  const fs::path out(resolve_output_dir(cfg));
  fs::create_directories(out);
  const Dataset data = prepare_dataset(cfg);
  std::vector<std::string> written;
  const std::string data_path = (out / "dataset.csv").string();
  save_dataset(data, data_path);
  written.push_back(data_path);
  if (data.graph) {
    const std::string graph_path = (out / "graph.csv").string();
    save_graph(*data.graph, graph_path);
    written.push_back(graph_path);
  }
  return written;
}

CertifyOutcome certify_directory(const std::string& dir, std::optional<double> tol_override) {
  CertifyOutcome outcome;
  for (const auto& run : run_dirs(dir)) {
    const auto meta = parse_key_values(read_file((run / "run.meta").string()));
    auto field = [&](const std::string& k) {
      auto it = meta.find(k);
      if (it == meta.end()) throw std::runtime_error((run / "run.meta").string() + ": missing " + k);
      return it->second;
    };
    TrajectoryLog log = parse_trajectory_csv(read_file((run / "trajectory.csv").string()));
    log.aborted = field("aborted") == "1";
    const double tol = tol_override.value_or(parse_double(field("tol_rel")));
    Provenance prov{field("config_hash"), field("dataset_digest"), std::stoull(field("seed"))};
    const auto cert = certificate(log, tol, coverage_from_string(field("coverage")), prov);
    const std::string derived = format_certificate(cert);
    const std::string name = run.filename().string();
    if (!tol_override) {
      const std::string stored = read_if_exists(run / "certificate.txt");
      if (stored != derived) {
        outcome.exit_code = 2;
        std::string msg = name + ": certificate mismatch";
        std::istringstream a(stored), b(derived);
        std::string la, lb;
        for (int line = 1;; ++line) {
          const bool ha = static_cast<bool>(std::getline(a, la));
          const bool hb = static_cast<bool>(std::getline(b, lb));
          if (!ha && !hb) break;
          if (!ha || !hb || la != lb) {
            msg += "\n  line " + std::to_string(line) + "\n  - stored:  " + (ha ? la : "<eof>") +
                   "\n  + derived: " + (hb ? lb : "<eof>");
            break;
          }
        }
        outcome.messages.push_back(msg);
        continue;
      }
    }
    if (cert.status != CertStatus::certified) outcome.exit_code = 2;
    outcome.messages.push_back(name + ": " + std::string(to_string(cert.status)) +
                               " (lambda0 = " + format_double(cert.lambda0) + ")");
  }
  return outcome;
}

std::vector<std::string> plot_directory(const std::string& dir) {
  std::vector<std::string> written;
  std::vector<PlotSeries> sweep;
  for (const auto& run : run_dirs(dir)) {
    const auto meta = parse_key_values(read_file((run / "run.meta").string()));
    TrajectoryLog log = parse_trajectory_csv(read_file((run / "trajectory.csv").string()));
    const auto cert_text = read_if_exists(run / "certificate.txt");
    if (cert_text.empty()) throw std::runtime_error("missing certificate.txt in " + run.string());
    const auto cert = parse_key_values(cert_text.substr(cert_text.find('\n') + 1));
    std::size_t first = 0;
    if (meta.count("plot_drop_initial") && meta.at("plot_drop_initial") == "1") first = log.size() / 100;

    PlotSeries curve{"loss", {}, {}, false};
    for (std::size_t i = first; i < log.size(); ++i) {
      curve.x.push_back(log.times[i]);
      curve.y.push_back(log.losses[i]);
    }
    std::vector<PlotSeries> series{curve};
    if (cert.count("status") && cert.at("status") == "certified") {
      const double lambda0 = parse_double(cert.at("lambda0"));
      const double tol = parse_double(cert.at("tol_rel"));
      const double factor = (1.0 + tol + kRoundoffSlack) * (1.0 + tol + kRoundoffSlack);
      PlotSeries env{"envelope", {}, {}, true};
      for (std::size_t i = first; i < log.size(); ++i) {
        env.x.push_back(log.times[i]);
        env.y.push_back(factor * std::exp(-2.0 * lambda0 * log.times[i]) * log.losses.front());
      }
      series.push_back(std::move(env));
    }
    const std::string title = run.filename().string() + " (" + (cert.count("status") ? cert.at("status") : "?") + ")";
    const std::string path = (run / "loss.svg").string();
    write_file(path, render_log_plot(title, series));
    written.push_back(path);
    curve.name = run.filename().string() + (meta.count("params") ? " P=" + meta.at("params") : "");
    sweep.push_back(std::move(curve));
  }
  const fs::path root(dir);
  if (!fs::exists(root / "run.meta")) {
    const std::string path = (root / "sweep.svg").string();
    write_file(path, render_log_plot("loss curves: " + root.filename().string(), sweep));
    written.push_back(path);
  }
  return written;
}

}  // namespace gflow
