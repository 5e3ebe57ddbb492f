#pragma once

// Model comparison table: Dice (higher is better) and HD95 (lower is better)
// per region. The best value in each column is marked; every row that
// attains it exactly is marked, so ties are all bold.

#include <array>
#include <charconv>
#include <cstddef>
#include <iomanip>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "brainnet/error.hpp"
#include "brainnet/grid.hpp"

namespace brainnet {

struct ModelSummary {
  std::string name;
  std::array<double, 3> dice{};  // TC, WT, ET
  std::array<double, 3> hd95{};  // TC, WT, ET
};

inline void from_json(const nlohmann::json& j, ModelSummary& m) {
  m.name = j.at("name").get<std::string>();
  m.dice = j.at("dice").get<std::array<double, 3>>();
  m.hd95 = j.at("hd95").get<std::array<double, 3>>();
}

inline void to_json(nlohmann::json& j, const ModelSummary& m) {
  j = {{"name", m.name}, {"dice", m.dice}, {"hd95", m.hd95}};
}

struct ComparisonTable {
  std::vector<ModelSummary> rows;
  /// bold[row][col]; columns 0-2 are Dice TC/WT/ET, 3-5 HD95 TC/WT/ET.
  std::vector<std::array<bool, 6>> bold;

  double value(std::size_t row, std::size_t col) const {
    return col < 3 ? rows[row].dice[col] : rows[row].hd95[col - 3];
  }
};

inline ComparisonTable render_comparison_table(std::vector<ModelSummary> records) {
  if (records.empty()) fail(ErrorCode::InvalidArgument, "comparison table needs at least one model");
  ComparisonTable t;
  t.rows = std::move(records);
  t.bold.assign(t.rows.size(), {});
  for (std::size_t col = 0; col < 6; ++col) {
    const bool higher_better = col < 3;
    double best = t.value(0, col);
    for (std::size_t r = 1; r < t.rows.size(); ++r) {
      const double v = t.value(r, col);
      if (higher_better ? v > best : v < best) best = v;
    }
    for (std::size_t r = 0; r < t.rows.size(); ++r) t.bold[r][col] = t.value(r, col) == best;
  }
  return t;
}

/// Shortest decimal that round-trips the double, e.g. 0.894, 3.47.
inline std::string format_number(double v) {
  std::array<char, 32> buf{};
  const auto res = std::to_chars(buf.data(), buf.data() + buf.size(), v);
  return std::string(buf.data(), res.ptr);
}

inline constexpr std::array<const char*, 6> kTableColumns = {"DC TC", "DC WT", "DC ET", "HD95 TC", "HD95 WT", "HD95 ET"};

inline std::string to_text(const ComparisonTable& t) {
  std::size_t name_w = 5;
  for (const auto& r : t.rows) name_w = std::max(name_w, r.name.size());
  std::ostringstream os;
  os << std::left << std::setw(static_cast<int>(name_w)) << "Model";
  for (const char* c : kTableColumns) os << " | " << std::setw(9) << c;
  os << "\n" << std::string(name_w + 6 * 12, '-') << "\n";
  for (std::size_t r = 0; r < t.rows.size(); ++r) {
    os << std::setw(static_cast<int>(name_w)) << t.rows[r].name;
    for (std::size_t c = 0; c < 6; ++c) {
      std::string cell = format_number(t.value(r, c));
      if (t.bold[r][c]) cell = "*" + cell + "*";
      os << " | " << std::setw(9) << cell;
    }
    os << "\n";
  }
  return os.str();
}

inline std::string to_csv(const ComparisonTable& t) {
  std::ostringstream os;
  os << "model,dc_tc,dc_wt,dc_et,hd95_tc,hd95_wt,hd95_et,best_columns\n";
  for (std::size_t r = 0; r < t.rows.size(); ++r) {
    os << t.rows[r].name;
    std::string best;
    for (std::size_t c = 0; c < 6; ++c) {
      os << "," << format_number(t.value(r, c));
      if (t.bold[r][c]) best += (best.empty() ? "" : ";") + std::string(kTableColumns[c]);
    }
    os << "," << best << "\n";
  }
  return os.str();
}

inline std::string latex_escape(std::string_view s) {
  std::string out;
  for (char c : s) {
    if (c == '&' || c == '%' || c == '_' || c == '#' || c == '$') out += '\\';
    out += c;
  }
  return out;
}

inline std::string to_latex(const ComparisonTable& t) {
  std::ostringstream os;
  os << "\\begin{tabular}{| c || c | c | c || c | c | c |}\n\\hline\n"
     << "\\multirow{2}{*}{Model} & \\multicolumn{3}{c||}{$DC$} & \\multicolumn{3}{c|}{$HD_{95}$} \\\\\n"
     << "\\cline{2-7}\n & TC & WT & ET & TC & WT & ET \\\\\n\\hline\n\\hline\n";
  for (std::size_t r = 0; r < t.rows.size(); ++r) {
    os << latex_escape(t.rows[r].name);
    for (std::size_t c = 0; c < 6; ++c) {
      const std::string cell = format_number(t.value(r, c));
      os << " & " << (t.bold[r][c] ? "\\textbf{" + cell + "}" : cell);
    }
    os << " \\\\\n\\hline\n";
  }
  os << "\\end{tabular}\n";
  return os.str();
}

}  // namespace brainnet
