#include "nvsim/runner.hpp"

#include <atomic>
#include <cmath>
#include <limits>
#include <map>
#include <mutex>
#include <sstream>
#include <thread>

#include "json.hpp"
#include "nvsim/analysis.hpp"
#include "nvsim/errors.hpp"

namespace nvsim {

std::string csv_quote(const std::string& field) {
  if (field.find_first_of(",\"\n\r") == std::string::npos) return field;
  std::string out = "\"";
  for (char c : field) {
    if (c == '"') out += '"';
    out += c;
  }
  out += '"';
  return out;
}

std::string ShotTable::to_csv() const {
  std::ostringstream out;
  out << "shot,accepted,reject_reason";
  for (std::size_t i = 0; i < slots.size(); ++i)
    out << "," << csv_quote(slots[i] + "_counts") << "," << csv_quote(slots[i] + "_declared");
  out << "\r\n";
  for (const auto& row : rows) {
    out << row.shot << "," << (row.accepted ? 1 : 0) << "," << csv_quote(row.reject_reason);
    for (std::size_t i = 0; i < slots.size(); ++i) {
      if (i < row.counts.size() && row.counts[i]) {
        const int c = *row.counts[i];
        out << "," << c << "," << (c >= slot_thresholds[i] ? "ms0" : "ms1");
      } else {
        out << ",,";
      }
    }
    out << "\r\n";
  }
  return out.str();
}

std::string ShotTable::to_json_summary() const {
  nlohmann::json j;
  j["n_shots"] = rows.size();
  long accepted = 0;
  std::map<std::string, long> reasons;
  for (const auto& r : rows) {
    if (r.accepted)
      ++accepted;
    else
      ++reasons[r.reject_reason];
  }
  j["accepted"] = accepted;
  j["rejected"] = nlohmann::json::object();
  for (const auto& [k, v] : reasons) j["rejected"][k] = v;
  j["reads"] = nlohmann::json::object();
  for (std::size_t i = 0; i < slots.size(); ++i) {
    long n = 0, ms0 = 0;
    double sum = 0.0;
    for (const auto& r : rows) {
      if (i < r.counts.size() && r.counts[i]) {
        ++n;
        sum += *r.counts[i];
        if (*r.counts[i] >= slot_thresholds[i]) ++ms0;
      }
    }
    nlohmann::json s;
    s["n"] = n;
    s["mean_counts"] = n > 0 ? sum / n : 0.0;
    const double p = n > 0 ? static_cast<double>(ms0) / n : 0.0;
    s["p_ms0"] = p;
    s["p_ms0_2se"] = 2.0 * binomial_se(p, n);
    j["reads"][slots[i]] = s;
  }
  return j.dump(2);
}

namespace {

struct ShotContext {
  const SimModel& model;
  const ExperimentConfig& exp;
  bool strict;
  double strict_max_distance_mhz;
  std::vector<std::pair<std::string, int>> last_counts;  // label -> most recent counts

  RegisterState state;
  ShotRow* row = nullptr;
  std::size_t slot_cursor = 0;
  bool aborted = false;

  int lookup(const std::string& label) const {
    for (auto it = last_counts.rbegin(); it != last_counts.rend(); ++it)
      if (it->first == label) return it->second;
    return -1;
  }
};

double nearest_line_distance(const HyperfineModel& hf, double carrier) {
  double best = std::numeric_limits<double>::infinity();
  for (const auto& l : enumerate_hyperfine_lines(hf, hf.n_active_nuclei))
    best = std::min(best, std::abs(l.frequency_mhz - carrier));
  return best;
}

void exec_statements(const std::vector<Statement>& stmts, ShotContext& ctx, Rng& rng) {
  for (const auto& s : stmts) {
    if (ctx.aborted) return;
    if (const auto* p = std::get_if<PumpStmt>(&s.node)) {
      const double power = p->power_nw.value_or(
          p->target == PumpTarget::Ms0 ? ctx.exp.pump_ms0_power_nw : ctx.exp.pump_pm1_power_nw);
      ctx.state = pump(ctx.state, p->target, p->duration_us, power, ctx.model, rng).state;
    } else if (const auto* m = std::get_if<MwStmt>(&s.node)) {
      if (ctx.strict &&
          nearest_line_distance(ctx.model.hf, m->carrier_mhz) > ctx.strict_max_distance_mhz)
        throw RunError("strict mode: MW carrier " + std::to_string(m->carrier_mhz) +
                       " MHz is more than 5 linewidths from every hyperfine line");
      if (m->duration_us > 0.0)
        ctx.state = mw_pulse(ctx.state, PulseParams{m->carrier_mhz, m->rabi_mhz, m->duration_us},
                             ctx.model.hf, rng);
    } else if (const auto* r = std::get_if<RfStmt>(&s.node)) {
      if (r->duration_us > 0.0)
        ctx.state = rf_pulse(ctx.state, PulseParams{r->carrier_mhz, r->rabi_mhz, r->duration_us},
                             ctx.model.hf, r->nucleus, rng);
    } else if (const auto* rd = std::get_if<ReadStmt>(&s.node)) {
      ReadoutConfig cfg{rd->duration_us, rd->threshold,
                        rd->power_nw.value_or(ctx.exp.readout.power_nw)};
      const auto outcome = single_shot_readout(ctx.state, cfg, ctx.model, rng);
      ctx.state = outcome.post_state;
      ctx.row->counts[ctx.slot_cursor++] = outcome.counts;
      ctx.last_counts.push_back({rd->label, outcome.counts});
    } else if (const auto* c = std::get_if<ConditionStmt>(&s.node)) {
      const int counts = ctx.lookup(c->label);
      const bool pass = c->at_least ? counts >= c->k : counts < c->k;
      if (counts < 0 || !pass) {
        ctx.row->accepted = false;
        ctx.row->reject_reason = "condition " + c->label;
        ctx.aborted = true;
      }
    } else if (const auto* cc = std::get_if<CheckChargeStmt>(&s.node)) {
      if (!charge_resonance_check(ctx.state, cc->p_reject, rng)) {
        ctx.row->accepted = false;
        ctx.row->reject_reason = "charge";
        ctx.aborted = true;
      }
    } else if (const auto* rep = std::get_if<RepeatStmt>(&s.node)) {
      for (long i = 0; i < rep->n && !ctx.aborted; ++i) exec_statements(rep->body, ctx, rng);
      // Skipped iterations leave their slots empty; advance the cursor so
      // later reads land in the right columns.
      if (ctx.aborted) return;
    }
  }
}

}  // namespace

ShotTable run_program(const ProtocolProgram& program, const SimModel& model,
                      const ExperimentConfig& exp, const RunOptions& options) {
  ShotTable table;
  table.slots = program.read_slots;
  // Slot thresholds in unroll order.
  {
    struct Walk {
      std::vector<int>* out;
      void operator()(const std::vector<Statement>& stmts) {
        for (const auto& s : stmts) {
          if (const auto* rd = std::get_if<ReadStmt>(&s.node)) out->push_back(rd->threshold);
          if (const auto* rep = std::get_if<RepeatStmt>(&s.node))
            for (long i = 0; i < rep->n; ++i) (*this)(rep->body);
        }
      }
    };
    Walk w{&table.slot_thresholds};
    w(program.statements);
  }

  const long n_shots = options.n_shots;
  table.rows.resize(n_shots);
  const std::uint64_t master = program.seed.value_or(options.master_seed);
  const double strict_dist = 5.0 * model.hf.linewidth_mhz;

  auto run_shot = [&](long shot) {
    ShotRow& row = table.rows[shot];
    row.shot = shot;
    row.counts.assign(table.slots.size(), std::nullopt);
    Rng rng = Rng::stream(master, static_cast<std::uint64_t>(shot));
    ShotContext ctx{model, exp, options.strict, strict_dist, {}, {}, &row, 0, false};
    ctx.state.nuclei = random_nuclear_config(model.hf.n_active_nuclei, rng);
    exec_statements(program.statements, ctx, rng);
  };

  const int n_threads = std::max(1, options.n_threads);
  if (n_threads == 1 || n_shots < 2) {
    for (long i = 0; i < n_shots; ++i) run_shot(i);
  } else {
    std::atomic<long> cursor{0};
    std::atomic<bool> failed{false};
    std::exception_ptr first_error;
    std::mutex error_mutex;
    std::vector<std::thread> pool;
    for (int t = 0; t < n_threads; ++t)
      pool.emplace_back([&] {
        while (true) {
          const long i = cursor.fetch_add(1);
          if (i >= n_shots || failed.load()) return;
          try {
            run_shot(i);
          } catch (...) {
            std::lock_guard<std::mutex> lock(error_mutex);
            if (!first_error) first_error = std::current_exception();
            failed.store(true);
            return;
          }
        }
      });
    for (auto& th : pool) th.join();
    if (first_error) std::rethrow_exception(first_error);
  }
  return table;
}

}  // namespace nvsim
