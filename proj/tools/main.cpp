// Command-line front end: run / sweep / validate-trace / oracle.
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "seqpar/config.hpp"
#include "seqpar/runner.hpp"

namespace {

using seqpar::RunConfig;

// Flags mirror the config file; a flag given on the command line wins over
// the file, which wins over the defaults.
struct ConfigFlags {
  std::string config_path;

  void attach(CLI::App* app) {
    app->add_option("--config", config_path, "JSON config file");
    auto opt = [&](const char* name, auto& field, const char* desc) {
      return app->add_option(name, field, desc);
    };
    opt("--seed", cfg.seed, "root RNG seed");
    opt("--layers", cfg.model.layers, "decoder layers");
    opt("--d", cfg.model.d, "model width");
    opt("--ffn-dim", cfg.model.ffn_dim, "feed-forward width");
    opt("--heads", cfg.model.heads, "attention heads");
    opt("--vocab", cfg.model.vocab, "vocabulary size");
    opt("--dv", cfg.model.d_v, "patch embedding width");
    opt("--patch-h", cfg.model.patch_h, "patch grid height");
    opt("--patch-w", cfg.model.patch_w, "patch grid width");
    opt("--pool", cfg.model.pool, "patches pooled per video token");
    app->add_flag("--norm,!--no-norm", cfg.model.norm, "layer normalization");
    opt("--frames", cfg.frames, "video frames");
    opt("--query-tokens", cfg.query_tokens, "query token count");
    app->add_flag("--needle,!--no-needle", cfg.needle, "plant the needle frame");
    opt("--needle-frame", cfg.needle_frame, "frame index carrying the needle");
    opt("--needle-gain", cfg.needle_gain, "needle amplitude");
    opt("--hosts", cfg.hosts, "physical host count");
    opt("--anchor-mode", anchor_mode, "anchor length mode: ratio|absolute");
    opt("--anchor-value", cfg.anchor_value, "anchor ratio or token count");
    opt("--passing-mode", passing_mode, "passing length mode: ratio|absolute|full");
    opt("--passing-value", cfg.passing_value, "passing ratio or token count");
    app->add_flag("--zigzag,!--naive-mapping", cfg.zigzag, "virtual host pairing");
    opt("--schedule", schedule, "overlapped|serialized");
    app->add_flag("--paper-faithful-query-keys", cfg.query_self_all_hosts,
                  "replicate query self-keys on every host");
    opt("--designated-host", cfg.designated_host, "host carrying query self-keys (-1 = last)");
    app->add_flag("--softmax-scores,!--raw-scores", cfg.softmax_scores,
                  "importance score aggregation");
    opt("--summary", cfg.summary_path, "summary JSON output path");
    opt("--trace", cfg.trace_path, "trace output path (one event per line)");
    opt("--heatmap", cfg.heatmap_path, "selection heatmap CSV output path");
    owner = app;
  }

  RunConfig resolve() {
    RunConfig out = config_path.empty() ? RunConfig{} : seqpar::load_config(config_path);
    // Re-apply only the flags the user actually passed.
    auto passed = [&](const char* name) { return owner->count(name) > 0; };
    if (passed("--seed")) out.seed = cfg.seed;
    if (passed("--layers")) out.model.layers = cfg.model.layers;
    if (passed("--d")) out.model.d = cfg.model.d;
    if (passed("--ffn-dim")) out.model.ffn_dim = cfg.model.ffn_dim;
    if (passed("--heads")) out.model.heads = cfg.model.heads;
    if (passed("--vocab")) out.model.vocab = cfg.model.vocab;
    if (passed("--dv")) out.model.d_v = cfg.model.d_v;
    if (passed("--patch-h")) out.model.patch_h = cfg.model.patch_h;
    if (passed("--patch-w")) out.model.patch_w = cfg.model.patch_w;
    if (passed("--pool")) out.model.pool = cfg.model.pool;
    if (passed("--norm") || passed("--no-norm")) out.model.norm = cfg.model.norm;
    if (passed("--frames")) out.frames = cfg.frames;
    if (passed("--query-tokens")) out.query_tokens = cfg.query_tokens;
    if (passed("--needle") || passed("--no-needle")) out.needle = cfg.needle;
    if (passed("--needle-frame")) out.needle_frame = cfg.needle_frame;
    if (passed("--needle-gain")) out.needle_gain = cfg.needle_gain;
    if (passed("--hosts")) out.hosts = cfg.hosts;
    if (passed("--anchor-mode")) out.anchor_mode = seqpar::length_mode_from_string(anchor_mode);
    if (passed("--anchor-value")) out.anchor_value = cfg.anchor_value;
    if (passed("--passing-mode")) {
      out.passing_mode = seqpar::length_mode_from_string(passing_mode);
    }
    if (passed("--passing-value")) out.passing_value = cfg.passing_value;
    if (passed("--zigzag") || passed("--naive-mapping")) out.zigzag = cfg.zigzag;
    if (passed("--schedule")) {
      if (schedule == "overlapped") {
        out.schedule = seqpar::SchedulePolicy::Overlapped;
      } else if (schedule == "serialized") {
        out.schedule = seqpar::SchedulePolicy::Serialized;
      } else {
        throw CLI::ValidationError("--schedule", "expected overlapped|serialized");
      }
    }
    if (passed("--paper-faithful-query-keys")) {
      out.query_self_all_hosts = cfg.query_self_all_hosts;
    }
    if (passed("--designated-host")) out.designated_host = cfg.designated_host;
    if (passed("--softmax-scores") || passed("--raw-scores")) {
      out.softmax_scores = cfg.softmax_scores;
    }
    if (passed("--summary")) out.summary_path = cfg.summary_path;
    if (passed("--trace")) out.trace_path = cfg.trace_path;
    if (passed("--heatmap")) out.heatmap_path = cfg.heatmap_path;
    return out;
  }

 private:
  RunConfig cfg;
  std::string anchor_mode, passing_mode, schedule;
  CLI::App* owner = nullptr;
};

int cmd_run(ConfigFlags& flags) {
  const RunConfig cfg = flags.resolve();
  const seqpar::RunSummary summary = seqpar::run(cfg);
  std::cout << seqpar::serialize_summary(summary) << "\n";
  if (!summary.ok()) {
    std::cerr << "FAILED: " << summary.violations.size() << " violation(s)\n";
    for (const std::string& v : summary.violations) std::cerr << "  " << v << "\n";
    return 1;
  }
  return 0;
}

int cmd_oracle(ConfigFlags& flags) {
  const RunConfig cfg = flags.resolve();
  const seqpar::Matrix hidden = seqpar::run_oracle(cfg);
  double checksum = 0.0;
  for (float v : hidden.data) checksum += v;
  std::cout << "rows=" << hidden.rows << " cols=" << hidden.cols << " checksum=" << checksum
            << "\n";
  return 0;
}

int cmd_validate(const std::string& path) {
  std::ifstream in(path);
  if (!in) {
    std::cerr << "cannot open trace file: " << path << "\n";
    return 2;
  }
  const seqpar::EventTrace trace = seqpar::read_trace(in);
  const std::vector<std::string> violations = seqpar::validate_trace(trace);
  if (violations.empty()) {
    std::cout << "trace OK (" << trace.events.size() << " events)\n";
    return 0;
  }
  for (const std::string& v : violations) std::cerr << v << "\n";
  return 1;
}

int cmd_sweep(ConfigFlags& flags, const std::vector<std::string>& axis_specs,
              const std::string& output) {
  const RunConfig base = flags.resolve();
  std::vector<seqpar::SweepAxis> axes;
  for (const std::string& spec : axis_specs) {
    const size_t eq = spec.find('=');
    if (eq == std::string::npos) {
      std::cerr << "bad --axis, expected path=v1|v2|...: " << spec << "\n";
      return 2;
    }
    seqpar::SweepAxis axis;
    axis.path = spec.substr(0, eq);
    std::istringstream values(spec.substr(eq + 1));
    std::string v;
    while (std::getline(values, v, '|')) axis.values.push_back(v);
    if (axis.values.empty()) {
      std::cerr << "axis has no values: " << spec << "\n";
      return 2;
    }
    axes.push_back(std::move(axis));
  }
  const std::vector<seqpar::SweepRow> rows = seqpar::sweep(base, axes);
  const std::string table = seqpar::sweep_table_csv(axes, rows);
  if (output.empty()) {
    std::cout << table;
  } else {
    std::ofstream out(output);
    if (!out) {
      std::cerr << "cannot write " << output << "\n";
      return 2;
    }
    out << table;
  }
  for (const seqpar::SweepRow& r : rows) {
    if (!r.error.empty()) std::cerr << "cell failed: " << r.error << "\n";
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Deterministic simulator for sequence-parallel approximate-attention prefill"};
  app.require_subcommand(1);

  ConfigFlags run_flags, oracle_flags, sweep_flags;
  CLI::App* run = app.add_subcommand("run", "oracle + simulated run with artifact emission");
  run_flags.attach(run);
  CLI::App* oracle = app.add_subcommand("oracle", "dense-only forward pass");
  oracle_flags.attach(oracle);

  std::string trace_path;
  CLI::App* validate = app.add_subcommand("validate-trace", "check a recorded event trace");
  validate->add_option("file", trace_path, "trace file")->required();

  std::vector<std::string> axis_specs;
  std::string sweep_output;
  CLI::App* sw = app.add_subcommand("sweep", "cross-product sweep over config fields");
  sweep_flags.attach(sw);
  sw->add_option("--axis", axis_specs, "axis as dotted.path=v1|v2|... (repeatable)");
  sw->add_option("--output", sweep_output, "CSV output path (default stdout)");

  CLI11_PARSE(app, argc, argv);
  try {
    if (run->parsed()) return cmd_run(run_flags);
    if (oracle->parsed()) return cmd_oracle(oracle_flags);
    if (validate->parsed()) return cmd_validate(trace_path);
    if (sw->parsed()) return cmd_sweep(sweep_flags, axis_specs, sweep_output);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
