#pragma once

#include "spt/backtest.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace spt {

/// ISO dates of a synthetic exchange calendar: `days_per_year` weekdays in
/// each calendar year, the surplus weekdays dropped at evenly spaced positions.
std::vector<std::string> trading_calendar(int first_year, int years, int days_per_year = 252);

/// Configuration of a simulated daily panel with planted cross-sectional premia.
///
/// Each day every asset draws an independent lognormal return. The asset with
/// the smallest capitalization at the previous close earns `small_cap_premium`
/// on top, and the asset with the highest last-reported ROA earns
/// `roa_premium`. ROA is reported every `roa_report_days` days and is
/// forward-filled between reports.
struct SyntheticPanelConfig {
  Eigen::Index assets = 10;
  int years = 10;
  int first_year = 2000;
  int days_per_year = 252;
  double daily_drift = 0.0002;
  double daily_vol = 0.005;
  double small_cap_premium = 0.0005;
  double roa_premium = 0.0002;
  int roa_report_days = 63;
  double cap_spread = 3.0;  ///< initial caps log-uniform on [1, cap_spread]
  std::uint64_t seed = 1;

  void validate() const;
};

/// Panel with "cap" and "roa" characteristics; every asset is a member on
/// every day.
MarketData simulate_panel(const SyntheticPanelConfig& config);

}  // namespace spt
