#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Core>

namespace cfsurv {

// Errors raised during panel ingestion and validation.
struct PanelError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct MissingColumn : PanelError {
  explicit MissingColumn(const std::string& col)
      : PanelError("missing column: " + col) {}
};
struct NonMonotoneTreatment : PanelError {
  explicit NonMonotoneTreatment(const std::string& id)
      : PanelError("treatment indicator decreases for subject " + id) {}
};
struct DuplicateRow : PanelError {
  DuplicateRow(const std::string& id, int t)
      : PanelError("duplicate row (" + id + ", t=" + std::to_string(t) + ")") {}
};
struct PostExitRow : PanelError {
  explicit PostExitRow(const std::string& id)
      : PanelError("row after event/censoring for subject " + id) {}
};
struct NoBaselineRow : PanelError {
  explicit NoBaselineRow(const std::string& id)
      : PanelError("subject " + id + " lacks a fully observed t=0 row") {}
};

// One subject's trajectory on the integer interval grid. Rows are contiguous
// from t = 0 to exit_t(); the exit row carries the event or censoring flag.
struct SubjectRecord {
  std::string id;
  std::vector<std::uint8_t> treat;  // B(t), non-decreasing
  Eigen::MatrixXd cov;              // n_rows x k, NaN when unobserved pre-LOCF
  Eigen::Matrix<std::uint8_t, Eigen::Dynamic, Eigen::Dynamic>
      observed;                     // n_rows x k measurement indicators
  Eigen::VectorXd baseline;
  bool event = false;
  bool censored = false;
  std::optional<int> treat_start;   // S: first t with B(t) = 1
  int entry_t = 0;                  // delayed entry: at risk from this row on

  int n_rows() const { return static_cast<int>(treat.size()); }
  int exit_t() const { return n_rows() - 1; }
  bool at_risk(int t) const { return t >= entry_t && t <= exit_t(); }
  bool treated_at(int t) const {
    return at_risk(t) && treat[static_cast<std::size_t>(t)] != 0;
  }
};

// Immutable after construction; estimators share it read-only.
struct Panel {
  std::vector<SubjectRecord> subjects;
  std::vector<std::string> covariate_names;
  std::vector<std::string> baseline_names;
  int t_max = 0;

  int n_subjects() const { return static_cast<int>(subjects.size()); }
  int n_covariates() const { return static_cast<int>(covariate_names.size()); }
  int covariate_index(const std::string& name) const;
  int baseline_index(const std::string& name) const;
  std::size_t n_rows() const;
  int n_events() const;
  int n_treated() const;
};

struct ValidationReport {
  std::vector<std::pair<std::string, std::string>> errors;  // (subject, rule)
  std::vector<std::string> warnings;
  int n_subjects = 0;
  std::size_t n_person_intervals = 0;
  int n_events = 0;
  int n_censorings = 0;
  int n_treated = 0;

  bool ok() const { return errors.empty(); }
};

// Column-role mapping for CSV ingestion. Roles id/time/event/censor/treat
// map to single headers; covariates and baselines are header lists.
struct PanelSchema {
  std::string id = "id";
  std::string time = "t";
  std::string event = "event";
  std::string censor = "censor";
  std::string treat = "treat";
  std::vector<std::string> covariates;  // empty: every unmapped column
  std::vector<std::string> baselines;

  // Parses a "role = header" config (covariates/baselines comma separated).
  static PanelSchema parse(std::istream& in);
  static PanelSchema parse_file(const std::string& path);
};

Panel load_panel(std::istream& csv, const PanelSchema& schema = {});
Panel load_panel_file(const std::string& path, const PanelSchema& schema = {});
void write_panel(const Panel& panel, std::ostream& out);

ValidationReport validate_panel(const Panel& panel);

// Fills unmeasured covariate cells with the most recent measured value.
// Carried cells keep observed = 0; measured cells are untouched.
Panel locf_expand(const Panel& panel);

enum class RiskMode { all_at_risk, treated_att };

// Indices of subjects at risk at the start of interval t. treated_att
// additionally requires treatment to have started by t (S_i <= t).
std::vector<int> risk_set(const Panel& panel, int t, RiskMode mode);

}  // namespace cfsurv
