#include "nvsim/program.hpp"

#include <algorithm>
#include <cctype>
#include <cstdlib>
#include <map>
#include <sstream>

#include "nvsim/errors.hpp"

namespace nvsim {

namespace {

struct Token {
  std::string text;
  int column;
};

std::vector<Token> tokenize(const std::string& line) {
  std::vector<Token> out;
  std::size_t i = 0;
  while (i < line.size()) {
    if (std::isspace(static_cast<unsigned char>(line[i]))) {
      ++i;
      continue;
    }
    if (line[i] == '#') break;
    std::size_t j = i;
    while (j < line.size() && !std::isspace(static_cast<unsigned char>(line[j])) &&
           line[j] != '#')
      ++j;
    out.push_back({line.substr(i, j - i), static_cast<int>(i + 1)});
    i = j;
  }
  return out;
}

std::string lower(std::string s) {
  std::transform(s.begin(), s.end(), s.begin(),
                 [](unsigned char c) { return std::tolower(c); });
  return s;
}

double parse_number_with_unit(const Token& tok, int line, const char* kind,
                              const std::vector<std::pair<std::string, double>>& units) {
  const std::string t = lower(tok.text);
  for (const auto& [suffix, scale] : units) {
    if (t.size() > suffix.size() && t.compare(t.size() - suffix.size(), suffix.size(), suffix) == 0) {
      const std::string num = t.substr(0, t.size() - suffix.size());
      char* end = nullptr;
      const double v = std::strtod(num.c_str(), &end);
      if (end == num.c_str() || *end != '\0')
        throw ParseError(line, tok.column, std::string("malformed ") + kind + ": " + tok.text);
      return v * scale;
    }
  }
  throw ParseError(line, tok.column,
                   std::string("missing/unknown unit on ") + kind + ": " + tok.text);
}

double parse_duration_us(const Token& tok, int line) {
  const double v = parse_number_with_unit(
      tok, line, "duration", {{"ns", 1e-3}, {"us", 1.0}, {"ms", 1e3}});
  if (v < 0.0) throw ParseError(line, tok.column, "duration must be >= 0");
  return v;
}

double parse_frequency_mhz(const Token& tok, int line) {
  return parse_number_with_unit(tok, line, "frequency",
                                {{"khz", 1e-3}, {"mhz", 1.0}, {"ghz", 1e3}});
}

double parse_power_nw(const Token& tok, int line) {
  const double v = parse_number_with_unit(tok, line, "power", {{"nw", 1.0}});
  if (v <= 0.0) throw ParseError(line, tok.column, "power must be positive");
  return v;
}

double parse_plain_number(const Token& tok, int line, const char* kind) {
  char* end = nullptr;
  const double v = std::strtod(tok.text.c_str(), &end);
  if (end == tok.text.c_str() || *end != '\0')
    throw ParseError(line, tok.column, std::string("malformed ") + kind + ": " + tok.text);
  return v;
}

long parse_integer(const Token& tok, int line, const char* kind) {
  char* end = nullptr;
  const long v = std::strtol(tok.text.c_str(), &end, 10);
  if (end == tok.text.c_str() || *end != '\0')
    throw ParseError(line, tok.column, std::string("malformed ") + kind + ": " + tok.text);
  return v;
}

int parse_threshold(const Token& tok, int line) {
  const std::string t = tok.text;
  if (t.rfind(">=", 0) != 0)
    throw ParseError(line, tok.column, "threshold must look like >=k: " + t);
  const long k = parse_integer({t.substr(2), tok.column + 2}, line, "threshold");
  if (k < 1) throw ParseError(line, tok.column, "threshold must be >= 1");
  return static_cast<int>(k);
}

void expect_arity(const std::vector<Token>& toks, int line, std::size_t lo, std::size_t hi) {
  if (toks.size() < lo || toks.size() > hi)
    throw ParseError(line, toks.front().column,
                     "wrong number of arguments for " + toks.front().text);
}

struct Validator {
  std::map<std::string, int> read_labels;  // label -> defining line
  std::vector<std::string> slots;
  std::map<std::string, long> executions;

  void walk(const std::vector<Statement>& stmts, int depth, long multiplicity) {
    if (depth > 8) throw ParseError(stmts.front().line, 1, "REPEAT nesting deeper than 8");
    for (const auto& s : stmts) {
      if (const auto* r = std::get_if<ReadStmt>(&s.node)) {
        if (read_labels.count(r->label))
          throw ParseError(s.line, 1, "duplicate READ label `" + r->label + "`");
        read_labels[r->label] = s.line;
        executions[r->label] = multiplicity;
      } else if (const auto* c = std::get_if<ConditionStmt>(&s.node)) {
        if (!read_labels.count(c->label))
          throw ParseError(s.line, 1, "undefined READ label `" + c->label + "`");
      } else if (const auto* rep = std::get_if<RepeatStmt>(&s.node)) {
        if (!rep->body.empty()) walk(rep->body, depth + 1, multiplicity * rep->n);
      }
    }
  }

  void collect_slots(const std::vector<Statement>& stmts) {
    std::map<std::string, long> counter;
    collect(stmts, counter);
  }

 private:
  void collect(const std::vector<Statement>& stmts, std::map<std::string, long>& counter) {
    for (const auto& s : stmts) {
      if (const auto* r = std::get_if<ReadStmt>(&s.node)) {
        long& k = counter[r->label];
        ++k;
        slots.push_back(executions[r->label] > 1 ? r->label + "#" + std::to_string(k) : r->label);
      } else if (const auto* rep = std::get_if<RepeatStmt>(&s.node)) {
        for (long i = 0; i < rep->n; ++i) collect(rep->body, counter);
      }
    }
  }
};

}  // namespace

ProtocolProgram parse_program(const std::string& source) {
  ProtocolProgram prog;
  std::vector<std::vector<Statement>*> stack = {&prog.statements};
  std::vector<int> repeat_lines;

  std::istringstream in(source);
  std::string raw;
  int line = 0;
  while (std::getline(in, raw)) {
    ++line;
    const auto toks = tokenize(raw);
    if (toks.empty()) continue;
    const std::string kw = lower(toks[0].text);
    auto& dst = *stack.back();

    if (kw == "name") {
      expect_arity(toks, line, 2, 2);
      prog.name = toks[1].text;
    } else if (kw == "seed") {
      expect_arity(toks, line, 2, 2);
      prog.seed = static_cast<std::uint64_t>(parse_integer(toks[1], line, "seed"));
    } else if (kw == "shots") {
      expect_arity(toks, line, 2, 2);
      prog.n_shots = parse_integer(toks[1], line, "shot count");
    } else if (kw == "pump") {
      expect_arity(toks, line, 3, 4);
      PumpStmt p;
      const std::string tgt = lower(toks[1].text);
      if (tgt == "ms0")
        p.target = PumpTarget::Ms0;
      else if (tgt == "ms1" || tgt == "mspm1" || tgt == "ms+-1" || tgt == "ms\xc2\xb1"
                                                                   "1")
        p.target = PumpTarget::MsPm1;
      else
        throw ParseError(line, toks[1].column, "pump target must be ms0 or ms1: " + toks[1].text);
      p.duration_us = parse_duration_us(toks[2], line);
      if (toks.size() == 4) p.power_nw = parse_power_nw(toks[3], line);
      dst.push_back({p, line});
    } else if (kw == "mw" || kw == "rf") {
      expect_arity(toks, line, 4, kw == "rf" ? 5 : 4);
      const double carrier = parse_frequency_mhz(toks[1], line);
      const double rabi = parse_frequency_mhz(toks[2], line);
      const double dur = parse_duration_us(toks[3], line);
      if (rabi < 0) throw ParseError(line, toks[2].column, "rabi frequency must be >= 0");
      if (kw == "mw") {
        dst.push_back({MwStmt{carrier, rabi, dur}, line});
      } else {
        RfStmt r{carrier, rabi, dur, 0};
        if (toks.size() == 5)
          r.nucleus = static_cast<int>(parse_integer(toks[4], line, "nucleus index"));
        dst.push_back({r, line});
      }
    } else if (kw == "read") {
      expect_arity(toks, line, 4, 5);
      ReadStmt r;
      r.duration_us = parse_duration_us(toks[1], line);
      r.threshold = parse_threshold(toks[2], line);
      r.label = toks[3].text;
      if (r.label.empty() || std::isdigit(static_cast<unsigned char>(r.label[0])))
        throw ParseError(line, toks[3].column, "bad READ label: " + r.label);
      if (toks.size() == 5) r.power_nw = parse_power_nw(toks[4], line);
      dst.push_back({r, line});
    } else if (kw == "condition") {
      expect_arity(toks, line, 3, 3);
      ConditionStmt c;
      c.label = toks[1].text;
      const std::string pred = lower(toks[2].text);
      if (pred.rfind("counts>=", 0) == 0) {
        c.at_least = true;
        c.k = static_cast<int>(parse_integer({pred.substr(8), toks[2].column + 8}, line, "count"));
      } else if (pred.rfind("counts<", 0) == 0) {
        c.at_least = false;
        c.k = static_cast<int>(parse_integer({pred.substr(7), toks[2].column + 7}, line, "count"));
      } else {
        throw ParseError(line, toks[2].column, "predicate must be counts>=k or counts<k");
      }
      dst.push_back({c, line});
    } else if (kw == "check_charge") {
      expect_arity(toks, line, 2, 2);
      const double p = parse_plain_number(toks[1], line, "probability");
      if (p < 0.0 || p > 1.0)
        throw ParseError(line, toks[1].column, "reject probability must be in [0,1]");
      dst.push_back({CheckChargeStmt{p}, line});
    } else if (kw == "repeat") {
      expect_arity(toks, line, 2, 2);
      const long n = parse_integer(toks[1], line, "repeat count");
      if (n < 0) throw ParseError(line, toks[1].column, "repeat count must be >= 0");
      dst.push_back({RepeatStmt{n, {}}, line});
      stack.push_back(&std::get<RepeatStmt>(dst.back().node).body);
      repeat_lines.push_back(line);
      if (stack.size() > 9) throw ParseError(line, toks[0].column, "REPEAT nesting deeper than 8");
    } else if (kw == "end") {
      expect_arity(toks, line, 1, 1);
      if (stack.size() == 1) throw ParseError(line, toks[0].column, "END without REPEAT");
      stack.pop_back();
      repeat_lines.pop_back();
    } else {
      throw ParseError(line, toks[0].column, "unknown keyword: " + toks[0].text);
    }
  }
  if (stack.size() != 1)
    throw ParseError(repeat_lines.back(), 1, "unclosed REPEAT block");

  if (!prog.statements.empty()) {
    Validator v;
    v.walk(prog.statements, 0, 1);
    v.collect_slots(prog.statements);
    prog.read_slots = std::move(v.slots);
  }
  return prog;
}

namespace {

std::string fmt(double v) {
  std::ostringstream s;
  s.precision(12);
  s << v;
  return s.str();
}

void print_stmts(std::ostringstream& out, const std::vector<Statement>& stmts, int depth) {
  const std::string pad(2 * depth, ' ');
  for (const auto& s : stmts) {
    if (const auto* p = std::get_if<PumpStmt>(&s.node)) {
      out << pad << "PUMP " << (p->target == PumpTarget::Ms0 ? "ms0" : "ms1") << " "
          << fmt(p->duration_us) << "us";
      if (p->power_nw) out << " " << fmt(*p->power_nw) << "nW";
      out << "\n";
    } else if (const auto* m = std::get_if<MwStmt>(&s.node)) {
      out << pad << "MW " << fmt(m->carrier_mhz) << "MHz " << fmt(m->rabi_mhz) << "MHz "
          << fmt(m->duration_us) << "us\n";
    } else if (const auto* r = std::get_if<RfStmt>(&s.node)) {
      out << pad << "RF " << fmt(r->carrier_mhz) << "MHz " << fmt(r->rabi_mhz) << "MHz "
          << fmt(r->duration_us) << "us";
      if (r->nucleus != 0) out << " " << r->nucleus;
      out << "\n";
    } else if (const auto* rd = std::get_if<ReadStmt>(&s.node)) {
      out << pad << "READ " << fmt(rd->duration_us) << "us >=" << rd->threshold << " "
          << rd->label;
      if (rd->power_nw) out << " " << fmt(*rd->power_nw) << "nW";
      out << "\n";
    } else if (const auto* c = std::get_if<ConditionStmt>(&s.node)) {
      out << pad << "CONDITION " << c->label << " counts" << (c->at_least ? ">=" : "<") << c->k
          << "\n";
    } else if (const auto* cc = std::get_if<CheckChargeStmt>(&s.node)) {
      out << pad << "CHECK_CHARGE " << fmt(cc->p_reject) << "\n";
    } else if (const auto* rep = std::get_if<RepeatStmt>(&s.node)) {
      out << pad << "REPEAT " << rep->n << "\n";
      print_stmts(out, rep->body, depth + 1);
      out << pad << "END\n";
    }
  }
}

}  // namespace

std::string pretty_print(const ProtocolProgram& program) {
  std::ostringstream out;
  if (!program.name.empty()) out << "NAME " << program.name << "\n";
  if (program.seed) out << "SEED " << *program.seed << "\n";
  if (program.n_shots) out << "SHOTS " << *program.n_shots << "\n";
  print_stmts(out, program.statements, 0);
  return out.str();
}

}  // namespace nvsim
