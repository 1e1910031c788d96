// motr_cli: generate / train / track / eval / gradcheck / report.

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "motr/motr.hpp"

using namespace motr;
namespace fs = std::filesystem;

namespace {

class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

RunConfig load_or_default(const std::string& path) {
  return path.empty() ? RunConfig{} : load_run_config(path);
}

void archive_config(const RunConfig& cfg, const fs::path& dir) {
  fs::create_directories(dir);
  save_run_config(cfg, (dir / "config.json").string());
}

std::string read_text(const fs::path& p) {
  std::ifstream in(p);
  if (!in) throw UsageError("cannot read " + p.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

// A split directory holds sequence directories; a sequence directory holds
// frames.bin directly.
std::vector<std::pair<std::string, Clip>> load_sequences(const fs::path& path) {
  if (!fs::exists(path)) throw UsageError("data path " + path.string() + " does not exist");
  std::vector<std::pair<std::string, Clip>> out;
  if (fs::exists(path / "frames.bin")) {
    out.emplace_back(path.filename().string(), read_sequence(path));
    return out;
  }
  for (const auto& dir : sequence_dirs(path)) out.emplace_back(dir.filename().string(), read_sequence(dir));
  if (out.empty()) throw UsageError("no sequences (frames.bin) under " + path.string());
  return out;
}

// ---- generate ----

struct GenerateArgs {
  std::string config, out;
};

int run_generate(const GenerateArgs& a) {
  const auto cfg = load_or_default(a.config);
  const fs::path out = a.out.empty() ? fs::path(cfg.data.data_dir) : fs::path(a.out);
  const std::uint64_t base = cfg.world.seed;
  const std::pair<const char*, std::size_t> splits[] = {{"train", cfg.data.train_sequences},
                                                        {"val", cfg.data.val_sequences}};
  for (std::size_t s = 0; s < 2; ++s) {
    const auto [name, count] = splits[s];
    // Validation sequences come from a disjoint seed range.
    const auto seqs = simulate_split(cfg.world, count, cfg.data.sequence_length,
                                     base + s * 1000000);
    for (std::size_t i = 0; i < seqs.size(); ++i) write_sequence(seqs[i], out / name / sequence_name(i));
    std::cout << "wrote " << seqs.size() << " " << name << " sequences to " << (out / name).string()
              << "\n";
  }
  archive_config(cfg, out);
  return 0;
}

// ---- train ----

struct TrainArgs {
  std::string config, data, val, out;
  long epochs = -1;
  std::size_t iterations = 0;
  long seed = -1;
};

int run_train(const TrainArgs& a) {
  auto cfg = load_or_default(a.config);
  if (a.epochs >= 0) cfg.train.epochs = static_cast<std::size_t>(a.epochs);
  if (a.seed >= 0) cfg.seed = cfg.train.seed = static_cast<std::uint64_t>(a.seed);
  cfg.validate();
  const fs::path out = a.out.empty() ? fs::path(cfg.data.output_dir) : fs::path(a.out);
  archive_config(cfg, out);

  std::vector<Clip> train_set;
  if (!a.data.empty()) {
    for (auto& [name, seq] : load_sequences(a.data)) train_set.push_back(std::move(seq));
  } else {
    train_set = simulate_split(cfg.world, cfg.data.train_sequences, cfg.data.sequence_length,
                               cfg.world.seed);
  }
  for (const auto& seq : train_set)
    if (seq.size() && seq.frames[0].image.width != cfg.model.image_size)
      throw UsageError("training frames are " + std::to_string(seq.frames[0].image.width) +
                       " px wide but model.image_size is " + std::to_string(cfg.model.image_size));

  auto model = init_model<float>(cfg.model, cfg.seed);
  auto save = [&](const std::string& name) {
    const auto path = (out / name).string();
    save_checkpoint(model, path);
    return path;
  };
  save("checkpoint-epoch0000.ckpt");
  if (cfg.train.epochs == 0 && a.iterations == 0) {
    std::cout << "wrote initial checkpoint " << save("model.ckpt") << "\n";
    return 0;
  }

  std::ofstream log(out / "log.csv");
  log << "iteration,epoch,clip_len,loss,objects,grad_norm,lr,seconds\n";
  const auto per_epoch = iterations_per_epoch(cfg.train, train_set.size());
  const auto t0 = std::chrono::steady_clock::now();
  TrainHooks hooks;
  hooks.on_iteration = [&](const IterationLog& l) {
    const double secs =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    log << l.iteration + 1 << ',' << l.epoch << ',' << l.clip_len << ',' << l.loss << ','
        << l.objects << ',' << l.grad_norm << ',' << scheduled_lr(l.iteration, l.epoch, cfg.train)
        << ',' << secs << '\n';
    if ((l.iteration + 1) % per_epoch == 0) {
      log.flush();
      const auto done = (l.iteration + 1) / per_epoch;
      std::cout << "epoch " << done << " loss " << l.loss << " (" << static_cast<int>(secs)
                << " s)\n";
      if (cfg.train.checkpoint_every && done % cfg.train.checkpoint_every == 0) {
        char name[64];
        std::snprintf(name, sizeof name, "checkpoint-epoch%04zu.ckpt", done);
        save(name);
      }
    }
  };
  const auto iters = train(model, train_set, cfg.train, clip_options(cfg), hooks, a.iterations);
  log.close();
  std::cout << "trained " << iters << " iterations; wrote " << save("model.ckpt") << "\n";

  if (!a.val.empty()) {
    std::vector<Clip> val;
    for (auto& [name, seq] : load_sequences(a.val)) val.push_back(std::move(seq));
    const auto report = evaluate_tracking(model, val, cfg.lifecycle);
    std::ofstream(out / "metrics.txt") << format_report(report);
    std::cout << format_report(report);
  }
  return 0;
}

// ---- track ----

struct TrackArgs {
  std::string config, checkpoint, data, out;
};

int run_track(const TrackArgs& a) {
  auto cfg = load_or_default(a.config);
  auto model = load_checkpoint<float>(a.checkpoint);
  cfg.model = model.config;
  const fs::path out = a.out.empty() ? fs::path("results") : fs::path(a.out);
  archive_config(cfg, out);
  for (const auto& [name, seq] : load_sequences(a.data)) {
    const auto tracks = track_sequence(model, seq, cfg.lifecycle);
    write_mot_file(to_mot_lines(tracks, model.config.image_size), (out / (name + ".txt")).string());
    std::cout << name << ": " << tracks.size() << " boxes\n";
  }
  return 0;
}

// ---- eval ----

struct EvalArgs {
  std::string gt, res, out;
  double iou = 0.5;
};

FrameBoxes read_boxes(const fs::path& file) {
  // IoU is scale-free, so pixel boxes are compared directly.
  return to_frame_boxes(read_mot_file(file.string()), 1);
}

int run_eval(const EvalArgs& a) {
  const fs::path gt(a.gt), res(a.res);
  if (!fs::exists(gt)) throw UsageError("ground truth " + gt.string() + " does not exist");
  if (!fs::exists(res)) throw UsageError("results " + res.string() + " do not exist");
  std::vector<MetricsReport> reports;
  std::ostringstream per_seq;
  if (fs::is_regular_file(gt)) {
    if (!fs::is_regular_file(res)) throw UsageError("--gt is a file, so --res must be a file");
    reports.push_back(evaluate(read_boxes(gt), read_boxes(res), a.iou));
  } else {
    std::vector<fs::path> dirs;
    for (const auto& e : fs::directory_iterator(gt))
      if (fs::exists(e.path() / "gt" / "gt.txt")) dirs.push_back(e.path());
    std::sort(dirs.begin(), dirs.end());
    if (dirs.empty()) throw UsageError("no <sequence>/gt/gt.txt under " + gt.string());
    for (const auto& d : dirs) {
      const auto name = d.filename().string();
      fs::path r = fs::is_directory(res) ? res / (name + ".txt") : res;
      if (fs::is_directory(res) && fs::exists(res / name / "gt" / "gt.txt") && !fs::exists(r))
        r = res / name / "gt" / "gt.txt";
      FrameBoxes hyp = fs::exists(r) ? read_boxes(r) : FrameBoxes{};
      if (!fs::exists(r)) std::cerr << "warning: no results for " << name << "; counted as empty\n";
      reports.push_back(evaluate(read_boxes(d / "gt" / "gt.txt"), hyp, a.iou));
      per_seq << name << ": MOTA " << reports.back().mot.mota << " IDF1 " << reports.back().id.idf1
              << " IDS " << reports.back().mot.ids << "\n";
    }
  }
  const auto report = pool_reports(reports);
  const auto text = format_report(report);
  std::cout << per_seq.str() << text;
  if (!a.out.empty()) std::ofstream(a.out) << text;
  return 0;
}

// ---- gradcheck ----

int run_gradcheck(std::size_t op_seeds, std::size_t composite_seeds) {
  const auto t0 = std::chrono::steady_clock::now();
  std::map<std::string, double> worst;
  std::vector<std::string> order;
  for (const auto& r : run_gradient_suite(op_seeds, composite_seeds)) {
    if (!worst.count(r.name)) order.push_back(r.name);
    worst[r.name] = std::max(worst[r.name], r.max_rel_error);
  }
  int failed = 0;
  for (const auto& name : order) {
    const bool ok = worst[name] < 1e-4;
    failed += !ok;
    std::printf("%s %-24s max rel err %.3e\n", ok ? "PASS" : "FAIL", name.c_str(), worst[name]);
  }
  std::printf("%zu checks, %d failed, %.1f s\n", order.size(), failed,
              std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count());
  return failed ? 1 : 0;
}

// ---- report ----

struct LogRow {
  double iteration = 0, loss = 0;
};

std::vector<LogRow> read_log(const fs::path& path) {
  std::istringstream in(read_text(path));
  std::string line;
  std::getline(in, line);
  std::vector<LogRow> rows;
  std::size_t n = 1;
  while (std::getline(in, line)) {
    ++n;
    if (line.empty()) continue;
    std::vector<std::string> f;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) f.push_back(cell);
    if (f.size() < 4) throw UsageError(path.string() + ":" + std::to_string(n) + ": malformed log line");
    rows.push_back({std::stod(f[0]), std::stod(f[3])});
  }
  return rows;
}

std::map<std::string, double> read_metrics(const fs::path& path) {
  std::map<std::string, double> m;
  std::istringstream in(read_text(path));
  std::string line;
  while (std::getline(in, line)) {
    const auto eq = line.find('=');
    if (eq == std::string::npos) continue;
    m[line.substr(0, eq)] = std::stod(line.substr(eq + 1));
  }
  return m;
}

const char* kColours[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"};

std::string loss_svg(const std::vector<std::pair<std::string, std::vector<LogRow>>>& runs) {
  const double W = 640, H = 360, L = 60, R = 20, T = 20, B = 40;
  double max_it = 1, max_loss = 1e-9;
  for (const auto& [_, rows] : runs)
    for (const auto& r : rows) {
      max_it = std::max(max_it, r.iteration);
      max_loss = std::max(max_loss, r.loss);
    }
  std::ostringstream s;
  s << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W << "\" height=\"" << H << "\">\n"
    << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n"
    << "<line x1=\"" << L << "\" y1=\"" << H - B << "\" x2=\"" << W - R << "\" y2=\"" << H - B
    << "\" stroke=\"black\"/>\n"
    << "<line x1=\"" << L << "\" y1=\"" << T << "\" x2=\"" << L << "\" y2=\"" << H - B
    << "\" stroke=\"black\"/>\n"
    << "<text x=\"" << W / 2 << "\" y=\"" << H - 8 << "\" font-size=\"12\">iteration (max "
    << max_it << ")</text>\n"
    << "<text x=\"4\" y=\"" << T + 10 << "\" font-size=\"12\">" << max_loss << "</text>\n"
    << "<text x=\"4\" y=\"" << H - B << "\" font-size=\"12\">0</text>\n";
  for (std::size_t k = 0; k < runs.size(); ++k) {
    const auto& rows = runs[k].second;
    s << "<polyline fill=\"none\" stroke=\"" << kColours[k % 6] << "\" points=\"";
    // Light smoothing keeps single-clip noise from hiding the trend.
    double ema = rows.empty() ? 0 : rows[0].loss;
    for (const auto& r : rows) {
      ema = 0.9 * ema + 0.1 * r.loss;
      s << L + (W - L - R) * r.iteration / max_it << ',' << (H - B) - (H - T - B) * ema / max_loss
        << ' ';
    }
    s << "\"/>\n<text x=\"" << W - R - 150 << "\" y=\"" << T + 14 * (k + 1) << "\" font-size=\"12\" fill=\""
      << kColours[k % 6] << "\">" << runs[k].first << "</text>\n";
  }
  s << "</svg>\n";
  return s.str();
}

std::string metrics_svg(const std::vector<std::pair<std::string, std::map<std::string, double>>>& runs) {
  const char* keys[] = {"MOTA", "IDF1"};
  const double W = 640, H = 300, L = 40, T = 20, B = 40, group = (W - L - 20) / 2;
  const double bar = group / static_cast<double>(runs.size() + 1);
  std::ostringstream s;
  s << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W << "\" height=\"" << H << "\">\n"
    << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n"
    << "<line x1=\"" << L << "\" y1=\"" << H - B << "\" x2=\"" << W - 20 << "\" y2=\"" << H - B
    << "\" stroke=\"black\"/>\n";
  for (int g = 0; g < 2; ++g) {
    s << "<text x=\"" << L + g * group + group / 3 << "\" y=\"" << H - 12 << "\" font-size=\"12\">"
      << keys[g] << "</text>\n";
    for (std::size_t k = 0; k < runs.size(); ++k) {
      auto it = runs[k].second.find(keys[g]);
      const double v = it == runs[k].second.end() ? 0 : std::clamp(it->second, 0.0, 1.0);
      const double h = (H - T - B) * v;
      s << "<rect x=\"" << L + g * group + bar * (static_cast<double>(k) + 0.5) << "\" y=\""
        << H - B - h << "\" width=\"" << bar * 0.9 << "\" height=\"" << h << "\" fill=\""
        << kColours[k % 6] << "\"><title>" << runs[k].first << " " << v << "</title></rect>\n";
    }
  }
  s << "</svg>\n";
  return s.str();
}

struct ReportArgs {
  std::vector<std::string> runs;
  std::string out;
};

int run_report(const ReportArgs& a) {
  const fs::path out = a.out.empty() ? fs::path("report") : fs::path(a.out);
  fs::create_directories(out);
  std::vector<std::pair<std::string, std::vector<LogRow>>> logs;
  std::vector<std::pair<std::string, std::map<std::string, double>>> metrics;
  std::ostringstream md;
  md << "# Training report\n\n| run | iterations | first loss | final loss | MOTA | IDF1 | IDS |\n"
     << "|---|---|---|---|---|---|---|\n";
  for (const auto& r : a.runs) {
    const fs::path dir(r);
    const auto name = dir.filename().empty() ? dir.parent_path().filename().string()
                                             : dir.filename().string();
    if (!fs::exists(dir / "log.csv")) throw UsageError("no log.csv in run directory " + r);
    auto rows = read_log(dir / "log.csv");
    std::map<std::string, double> m;
    if (fs::exists(dir / "metrics.txt")) m = read_metrics(dir / "metrics.txt");
    auto cell = [&](const char* k) {
      auto it = m.find(k);
      if (it == m.end()) return std::string("-");
      std::ostringstream os;
      os << it->second;
      return os.str();
    };
    md << "| " << name << " | " << rows.size() << " | "
       << (rows.empty() ? 0.0 : rows.front().loss) << " | "
       << (rows.empty() ? 0.0 : rows.back().loss) << " | " << cell("MOTA") << " | "
       << cell("IDF1") << " | " << cell("IDS") << " |\n";
    logs.emplace_back(name, std::move(rows));
    if (!m.empty()) metrics.emplace_back(name, std::move(m));
  }
  std::ofstream(out / "loss.svg") << loss_svg(logs);
  md << "\n![loss](loss.svg)\n";
  if (!metrics.empty()) {
    std::ofstream(out / "metrics.svg") << metrics_svg(metrics);
    md << "\n![metrics](metrics.svg)\n";
  }
  std::ofstream(out / "report.md") << md.str();
  std::cout << md.str();
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Toy end-to-end multi-object tracker with track queries"};
  app.require_subcommand(0, 1);
  bool dump = false;
  std::string dump_from;
  app.add_flag("--dump-config", dump, "Print the full configuration (defaults or --config) and exit");
  app.add_option("--config", dump_from, "Configuration used with --dump-config")->check(CLI::ExistingFile);

  GenerateArgs gen;
  auto* g = app.add_subcommand("generate", "Simulate train/val sequences and write a dataset dump");
  g->add_option("--config", gen.config, "Run configuration (JSON)")->check(CLI::ExistingFile);
  g->add_option("--out", gen.out, "Output directory (default: data.data_dir)");

  TrainArgs tr;
  auto* t = app.add_subcommand("train", "Train a model; writes checkpoints, log.csv and config.json");
  t->add_option("--config", tr.config, "Run configuration (JSON)")->check(CLI::ExistingFile);
  t->add_option("--data", tr.data, "Training split or sequence directory (default: simulate)");
  t->add_option("--val", tr.val, "Validation split evaluated after training");
  t->add_option("--out", tr.out, "Run directory (default: data.output_dir)");
  t->add_option("--epochs", tr.epochs, "Override train.epochs; 0 writes the initial checkpoint")
      ->check(CLI::NonNegativeNumber);
  t->add_option("--iterations", tr.iterations, "Stop after this many iterations");
  t->add_option("--seed", tr.seed, "Override the run seed")->check(CLI::NonNegativeNumber);

  TrackArgs tk;
  auto* k = app.add_subcommand("track", "Track sequences with a checkpoint; writes MOTChallenge files");
  k->add_option("--checkpoint", tk.checkpoint, "Model checkpoint")->required()->check(CLI::ExistingFile);
  k->add_option("--data", tk.data, "Split or sequence directory")->required();
  k->add_option("--config", tk.config, "Configuration supplying lifecycle thresholds")
      ->check(CLI::ExistingFile);
  k->add_option("--out", tk.out, "Result directory (default: results)");

  EvalArgs ev;
  auto* e = app.add_subcommand("eval", "Compute MOTA / IDF1 / IDS");
  e->add_option("--gt", ev.gt, "Ground-truth file, or split directory with <seq>/gt/gt.txt")->required();
  e->add_option("--res", ev.res, "Result file, or directory with <seq>.txt")->required();
  e->add_option("--iou", ev.iou, "IoU threshold")->check(CLI::Range(0.0, 1.0));
  e->add_option("--out", ev.out, "Also write the key=value report here");

  std::size_t op_seeds = 100, composite_seeds = 20;
  auto* gc = app.add_subcommand("gradcheck", "Finite-difference check of every op and composite path");
  gc->add_option("--op-seeds", op_seeds, "Random shapes per op");
  gc->add_option("--composite-seeds", composite_seeds, "Random draws per composite path");

  ReportArgs rp;
  auto* r = app.add_subcommand("report", "Loss curves and metric bars from run directories");
  r->add_option("runs", rp.runs, "Run directories (containing log.csv)")->required();
  r->add_option("--out", rp.out, "Output directory (default: report)");

  CLI11_PARSE(app, argc, argv);
  try {
    if (dump) {
      std::cout << dump_config(load_or_default(dump_from));
      return 0;
    }
    if (*g) return run_generate(gen);
    if (*t) return run_train(tr);
    if (*k) return run_track(tk);
    if (*e) return run_eval(ev);
    if (*gc) return run_gradcheck(op_seeds, composite_seeds);
    if (*r) return run_report(rp);
    std::cerr << app.help();
    return 1;
  } catch (const std::exception& ex) {
    std::cerr << "error: " << ex.what() << "\n";
    return 1;
  }
}
