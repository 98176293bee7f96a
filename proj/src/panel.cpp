#include "cfsurv/panel.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <map>
#include <sstream>
#include <unordered_map>

namespace cfsurv {

namespace {

std::string trim(const std::string& s) {
  auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

std::vector<std::string> split(const std::string& line, char sep) {
  std::vector<std::string> out;
  std::string cur;
  std::stringstream ss(line);
  while (std::getline(ss, cur, sep)) out.push_back(cur);
  if (!line.empty() && line.back() == sep) out.emplace_back();
  return out;
}

double parse_num(const std::string& s, const std::string& what) {
  try {
    std::size_t pos = 0;
    double v = std::stod(s, &pos);
    if (pos != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    throw PanelError("cannot parse numeric value '" + s + "' in column " + what);
  }
}

struct RawRow {
  int t;
  std::uint8_t treat;
  std::uint8_t event;
  std::uint8_t censor;
  std::vector<double> cov;           // NaN = missing cell
  std::vector<std::uint8_t> obs;
  std::vector<double> baseline;
};

}  // namespace

int Panel::covariate_index(const std::string& name) const {
  auto it = std::find(covariate_names.begin(), covariate_names.end(), name);
  if (it == covariate_names.end())
    throw PanelError("unknown covariate: " + name);
  return static_cast<int>(it - covariate_names.begin());
}

int Panel::baseline_index(const std::string& name) const {
  auto it = std::find(baseline_names.begin(), baseline_names.end(), name);
  if (it == baseline_names.end())
    throw PanelError("unknown baseline covariate: " + name);
  return static_cast<int>(it - baseline_names.begin());
}

std::size_t Panel::n_rows() const {
  std::size_t n = 0;
  for (const auto& s : subjects) n += static_cast<std::size_t>(s.n_rows());
  return n;
}

int Panel::n_events() const {
  int n = 0;
  for (const auto& s : subjects) n += s.event ? 1 : 0;
  return n;
}

int Panel::n_treated() const {
  int n = 0;
  for (const auto& s : subjects) n += s.treat_start.has_value() ? 1 : 0;
  return n;
}

PanelSchema PanelSchema::parse(std::istream& in) {
  PanelSchema schema;
  std::string line;
  while (std::getline(in, line)) {
    auto hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    auto eq = line.find('=');
    if (eq == std::string::npos)
      throw PanelError("schema line without '=': " + line);
    std::string key = trim(line.substr(0, eq));
    std::string val = trim(line.substr(eq + 1));
    if (key == "id") schema.id = val;
    else if (key == "time") schema.time = val;
    else if (key == "event") schema.event = val;
    else if (key == "censor") schema.censor = val;
    else if (key == "treat") schema.treat = val;
    else if (key == "covariates" || key == "baselines") {
      auto& dst = (key == "covariates") ? schema.covariates : schema.baselines;
      for (auto& tok : split(val, ',')) {
        auto name = trim(tok);
        if (!name.empty()) dst.push_back(name);
      }
    } else {
      throw PanelError("unknown schema role: " + key);
    }
  }
  return schema;
}

PanelSchema PanelSchema::parse_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw PanelError("cannot open schema file: " + path);
  return parse(in);
}

Panel load_panel(std::istream& csv, const PanelSchema& schema) {
  std::string header_line;
  if (!std::getline(csv, header_line))
    throw PanelError("empty CSV stream");
  if (!header_line.empty() && header_line.back() == '\r') header_line.pop_back();
  auto headers = split(header_line, ',');
  std::unordered_map<std::string, int> col;
  for (int i = 0; i < static_cast<int>(headers.size()); ++i)
    col[trim(headers[i])] = i;

  auto require = [&](const std::string& name) {
    auto it = col.find(name);
    if (it == col.end()) throw MissingColumn(name);
    return it->second;
  };
  const int c_id = require(schema.id);
  const int c_t = require(schema.time);
  const int c_event = require(schema.event);
  const int c_censor = require(schema.censor);
  const int c_treat = require(schema.treat);

  std::vector<std::string> cov_names = schema.covariates;
  if (cov_names.empty()) {
    std::vector<std::string> mapped = {schema.id, schema.time, schema.event,
                                       schema.censor, schema.treat};
    for (const auto& b : schema.baselines) mapped.push_back(b);
    for (const auto& h : headers) {
      auto name = trim(h);
      if (std::find(mapped.begin(), mapped.end(), name) == mapped.end())
        cov_names.push_back(name);
    }
  }
  std::vector<int> c_cov, c_base;
  for (const auto& n : cov_names) c_cov.push_back(require(n));
  for (const auto& n : schema.baselines) c_base.push_back(require(n));

  // Rows grouped per subject in first-seen order; sorted by t within subject.
  std::vector<std::string> order;
  std::unordered_map<std::string, std::map<int, RawRow>> by_subject;

  std::string line;
  std::size_t lineno = 1;
  while (std::getline(csv, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (trim(line).empty()) continue;
    auto fields = split(line, ',');
    if (fields.size() < headers.size())
      throw PanelError("line " + std::to_string(lineno) + ": expected " +
                       std::to_string(headers.size()) + " fields");
    std::string id = trim(fields[static_cast<std::size_t>(c_id)]);
    double traw = parse_num(trim(fields[static_cast<std::size_t>(c_t)]), schema.time);
    if (traw < 0 || traw != std::floor(traw))
      throw PanelError("line " + std::to_string(lineno) +
                       ": time must be a non-negative integer");
    RawRow row;
    row.t = static_cast<int>(traw);
    row.treat = parse_num(trim(fields[static_cast<std::size_t>(c_treat)]), schema.treat) != 0;
    row.event = parse_num(trim(fields[static_cast<std::size_t>(c_event)]), schema.event) != 0;
    row.censor = parse_num(trim(fields[static_cast<std::size_t>(c_censor)]), schema.censor) != 0;
    for (int c : c_cov) {
      auto cell = trim(fields[static_cast<std::size_t>(c)]);
      if (cell.empty()) {
        row.cov.push_back(std::numeric_limits<double>::quiet_NaN());
        row.obs.push_back(0);
      } else {
        row.cov.push_back(parse_num(cell, "covariate"));
        row.obs.push_back(1);
      }
    }
    for (int c : c_base)
      row.baseline.push_back(parse_num(trim(fields[static_cast<std::size_t>(c)]), "baseline"));

    auto it = by_subject.find(id);
    if (it == by_subject.end()) {
      order.push_back(id);
      it = by_subject.emplace(id, std::map<int, RawRow>{}).first;
    }
    if (!it->second.emplace(row.t, std::move(row)).second)
      throw DuplicateRow(id, row.t);
  }

  Panel panel;
  panel.covariate_names = cov_names;
  panel.baseline_names = schema.baselines;
  const int k = static_cast<int>(cov_names.size());
  for (const auto& id : order) {
    auto& rows = by_subject[id];
    SubjectRecord s;
    s.id = id;
    // Rows may start after t = 0 (delayed entry); storage stays indexed by
    // absolute time, with the pre-entry span unobserved.
    const int entry = rows.begin()->first;
    s.entry_t = entry;
    const int n = entry + static_cast<int>(rows.size());
    s.treat.assign(static_cast<std::size_t>(n), 0);
    s.cov = Eigen::MatrixXd::Constant(n, k, std::numeric_limits<double>::quiet_NaN());
    s.observed.setZero(n, k);
    int expect = entry;
    bool exited = false;
    std::uint8_t prev_treat = 0;
    for (auto& [t, row] : rows) {
      if (t != expect)
        throw PanelError("subject " + id + ": rows not contiguous from entry (gap before t=" +
                         std::to_string(t) + ")");
      if (exited) throw PostExitRow(id);
      if (row.treat < prev_treat) throw NonMonotoneTreatment(id);
      prev_treat = row.treat;
      s.treat[static_cast<std::size_t>(t)] = row.treat;
      for (int j = 0; j < k; ++j) {
        s.cov(t, j) = row.cov[static_cast<std::size_t>(j)];
        s.observed(t, j) = row.obs[static_cast<std::size_t>(j)];
      }
      if (row.treat && !s.treat_start) s.treat_start = t;
      if (t == entry) {
        s.baseline = Eigen::Map<const Eigen::VectorXd>(
            row.baseline.data(), static_cast<Eigen::Index>(row.baseline.size()));
      }
      if (row.event && row.censor)
        throw PanelError("subject " + id + ": event and censoring on the same row");
      if (row.event) { s.event = true; exited = true; }
      if (row.censor) { s.censored = true; exited = true; }
      ++expect;
    }
    panel.t_max = std::max(panel.t_max, s.exit_t());
    panel.subjects.push_back(std::move(s));
  }
  return panel;
}

Panel load_panel_file(const std::string& path, const PanelSchema& schema) {
  std::ifstream in(path);
  if (!in) throw PanelError("cannot open panel file: " + path);
  return load_panel(in, schema);
}

void write_panel(const Panel& panel, std::ostream& out) {
  out << "id,t,treat,event,censor";
  for (const auto& n : panel.covariate_names) out << ',' << n;
  for (const auto& n : panel.baseline_names) out << ',' << n;
  out << '\n';
  out.precision(17);
  for (const auto& s : panel.subjects) {
    for (int t = s.entry_t; t <= s.exit_t(); ++t) {
      const bool last = t == s.exit_t();
      out << s.id << ',' << t << ',' << int(s.treat[static_cast<std::size_t>(t)]) << ','
          << (last && s.event ? 1 : 0) << ',' << (last && s.censored ? 1 : 0);
      for (int j = 0; j < panel.n_covariates(); ++j) {
        out << ',';
        if (s.observed(t, j) || !std::isnan(s.cov(t, j))) out << s.cov(t, j);
      }
      for (Eigen::Index j = 0; j < s.baseline.size(); ++j) out << ',' << s.baseline(j);
      out << '\n';
    }
  }
}

ValidationReport validate_panel(const Panel& panel) {
  ValidationReport rep;
  rep.n_subjects = panel.n_subjects();
  for (const auto& s : panel.subjects) {
    rep.n_person_intervals += static_cast<std::size_t>(s.n_rows());
    if (s.event) ++rep.n_events;
    if (s.censored) ++rep.n_censorings;
    if (s.treat_start) ++rep.n_treated;
    if (s.n_rows() == 0) {
      rep.errors.emplace_back(s.id, "no rows");
      continue;
    }
    std::uint8_t prev = 0;
    for (int t = 0; t <= s.exit_t(); ++t) {
      std::uint8_t b = s.treat[static_cast<std::size_t>(t)];
      if (b < prev) {
        rep.errors.emplace_back(s.id, "treatment indicator decreases");
        break;
      }
      prev = b;
    }
    if (s.event && s.censored)
      rep.errors.emplace_back(s.id, "both event and censoring recorded");
    if (s.treat_start) {
      const int S = *s.treat_start;
      if (S > s.exit_t() || !s.treat[static_cast<std::size_t>(S)] ||
          (S > 0 && s.treat[static_cast<std::size_t>(S) - 1]))
        rep.errors.emplace_back(s.id, "treat_start inconsistent with B(t)");
    }
    for (int t = 0; t <= s.exit_t(); ++t)
      for (int j = 0; j < panel.n_covariates(); ++j)
        if (s.observed(t, j) && std::isnan(s.cov(t, j))) {
          rep.errors.emplace_back(s.id, "observed flag set on a missing cell");
          t = s.exit_t() + 1;
          break;
        }
  }
  return rep;
}

Panel locf_expand(const Panel& panel) {
  Panel out = panel;
  for (auto& s : out.subjects) {
    for (int j = 0; j < out.n_covariates(); ++j) {
      if (s.n_rows() == 0 || !s.observed(0, j)) throw NoBaselineRow(s.id);
      double last = s.cov(0, j);
      for (int t = 1; t <= s.exit_t(); ++t) {
        if (s.observed(t, j)) {
          last = s.cov(t, j);
        } else {
          s.cov(t, j) = last;  // observed flag stays 0
        }
      }
    }
  }
  return out;
}

std::vector<int> risk_set(const Panel& panel, int t, RiskMode mode) {
  std::vector<int> out;
  for (int i = 0; i < panel.n_subjects(); ++i) {
    const auto& s = panel.subjects[static_cast<std::size_t>(i)];
    if (!s.at_risk(t)) continue;
    // On treatment at t means the start interval itself counts (B(t) = 1
    // from t = S on), matching the rows the manipulated-panel fit sees.
    if (mode == RiskMode::treated_att &&
        !(s.treat_start && *s.treat_start <= t))
      continue;
    out.push_back(i);
  }
  return out;
}

}  // namespace cfsurv
