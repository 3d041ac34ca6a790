#include "seqpar/runner.hpp"

#include <fstream>
#include <sstream>
#include <stdexcept>

#include "json.hpp"

namespace seqpar {

using nlohmann::json;

namespace {

SimInputs make_inputs(const RunConfig& c) {
  SimInputs in;
  in.video = make_random_video(c.seed, c.model, c.frames);
  in.query_tokens = make_random_tokens(c.seed, c.model, c.query_tokens);
  in.needle = c.needle;
  in.needle_frame = c.needle_frame;
  in.needle_gain = c.needle_gain;
  return in;
}

json summary_json(const RunSummary& s) {
  json j;
  j["config"] = json::parse(serialize_config(s.config));
  j["plan"] = {{"n_v", s.plan.n_v}, {"n_t", s.plan.n_t}, {"l_a", s.plan.l_a},
               {"l_b", s.plan.l_b}, {"l_p", s.plan.l_p}, {"pad", s.plan.pad},
               {"virtual_hosts", s.plan.virtual_hosts}};
  j["divergence"] = {{"max_abs", s.divergence.max_abs},
                     {"mean_abs", s.divergence.mean_abs},
                     {"cosine_min", s.divergence.cosine_min},
                     {"cosine_mean", s.divergence.cosine_mean},
                     {"selection_recall", s.divergence.selection_recall}};
  j["cost"] = {{"per_host_flops", s.cost.per_host_flops},
               {"passing_bytes_per_layer", s.cost.comm_per_layer.passing_bytes},
               {"query_bytes_per_layer", s.cost.comm_per_layer.query_bytes},
               {"dense_flops_per_layer", s.cost.dense_flops_per_layer},
               {"reduction_ratio", s.cost.reduction_ratio}};
  j["balance"] = {{"per_host", s.balance.per_host}, {"max_min_ratio", s.balance.max_min_ratio}};
  j["violations"] = s.violations;
  j["wall_seconds"] = s.wall_seconds;
  return j;
}

}  // namespace

std::string serialize_summary(const RunSummary& s) { return summary_json(s).dump(2); }

Matrix run_oracle(const RunConfig& c) {
  const ModelParams params = init_params(c.seed, c.model);
  const SimInputs inputs = make_inputs(c);
  return dense_prefill_oracle(embedded_sequence(params, inputs), params);
}

RunSummary run(const RunConfig& c) {
  RunSummary s;
  s.config = c;
  const auto [l_a, l_p] = c.resolve_lengths();
  const ModelParams params = init_params(c.seed, c.model);
  const SimInputs inputs = make_inputs(c);

  SimulationResult result = simulate(c.hosts, params, inputs, l_a, l_p, c.sim_options());
  const Matrix oracle = dense_prefill_oracle(embedded_sequence(params, inputs), params);

  s.plan = result.plan;
  s.divergence = divergence(result, oracle);
  s.cost = cost_report(result.plan, c.hosts, c.model.d, static_cast<int>(sizeof(float)));
  s.balance = balance_report(result);
  s.violations = validate_trace(result.trace);
  s.violations.insert(s.violations.end(), result.violations.begin(), result.violations.end());
  s.wall_seconds = result.wall_seconds;

  if (!c.trace_path.empty()) {
    std::ofstream out(c.trace_path);
    if (!out) throw std::runtime_error("cannot write trace to " + c.trace_path);
    write_trace(result.trace, out);
  }
  if (!c.heatmap_path.empty()) {
    std::ofstream out(c.heatmap_path);
    if (!out) throw std::runtime_error("cannot write heatmap to " + c.heatmap_path);
    out << "token_index,frequency\n";
    const SelectionHeatmap map = needle_heatmap(result);
    for (size_t i = 0; i < map.frequency.size(); ++i) {
      out << i << "," << map.frequency[i] << "\n";
    }
  }
  if (!c.summary_path.empty()) {
    std::ofstream out(c.summary_path);
    if (!out) throw std::runtime_error("cannot write summary to " + c.summary_path);
    out << serialize_summary(s) << "\n";
  }
  return s;
}

namespace {

void apply_override(json& j, const std::string& path, const std::string& value) {
  json* cur = &j;
  size_t start = 0;
  while (true) {
    const size_t dot = path.find('.', start);
    const std::string key = path.substr(start, dot == std::string::npos ? dot : dot - start);
    if (dot == std::string::npos) {
      (*cur)[key] = json::parse(value);
      return;
    }
    cur = &(*cur)[key];
    start = dot + 1;
  }
}

}  // namespace

std::vector<SweepRow> sweep(const RunConfig& base, const std::vector<SweepAxis>& axes) {
  std::vector<SweepRow> rows;
  std::vector<size_t> idx(axes.size(), 0);
  const json base_json = json::parse(serialize_config(base));
  while (true) {
    SweepRow row;
    json cell = base_json;
    for (size_t a = 0; a < axes.size(); ++a) {
      apply_override(cell, axes[a].path, axes[a].values[idx[a]]);
      row.cell[axes[a].path] = axes[a].values[idx[a]];
    }
    try {
      RunConfig cfg = parse_config(cell.dump());
      // Cells never write files; the sweep table is the artifact.
      cfg.summary_path.clear();
      cfg.trace_path.clear();
      cfg.heatmap_path.clear();
      row.summary = run(cfg);
      if (!row.summary.ok()) row.error = "violations: " + row.summary.violations.front();
    } catch (const std::exception& e) {
      row.error = e.what();
    }
    rows.push_back(std::move(row));

    // Odometer increment, last axis fastest.
    size_t a = axes.size();
    while (a > 0) {
      --a;
      if (++idx[a] < axes[a].values.size()) break;
      idx[a] = 0;
      if (a == 0) return rows;
    }
    if (axes.empty()) return rows;
  }
}

std::string sweep_table_csv(const std::vector<SweepAxis>& axes,
                            const std::vector<SweepRow>& rows) {
  std::ostringstream os;
  for (const SweepAxis& a : axes) os << a.path << ",";
  os << "l_a,l_b,l_p,max_abs,mean_abs,selection_recall,balance_ratio,per_host_flops,ok,error\n";
  for (const SweepRow& r : rows) {
    for (const SweepAxis& a : axes) os << r.cell.at(a.path) << ",";
    const RunSummary& s = r.summary;
    os << s.plan.l_a << "," << s.plan.l_b << "," << s.plan.l_p << "," << s.divergence.max_abs
       << "," << s.divergence.mean_abs << "," << s.divergence.selection_recall << ","
       << s.balance.max_min_ratio << ","
       << (s.cost.per_host_flops.empty() ? 0 : s.cost.per_host_flops.front()) << ","
       << (r.error.empty() ? "yes" : "no") << "," << r.error << "\n";
  }
  return os.str();
}

}  // namespace seqpar
