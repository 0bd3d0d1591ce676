#pragma once

#include "spt/backtest.hpp"

#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

namespace spt {

/// Ingested panel plus non-fatal findings (calendar gaps).
struct IngestResult {
  MarketData data;
  std::vector<std::string> warnings;
};

/// Long-format inputs:
///   returns:          date,asset_id,return[,member]
///   characteristics:  date,asset_id,name,value   (value known at that date's close)
///   membership:       date,asset_id,member       (overrides the returns file)
///
/// Dates are ISO `YYYY-MM-DD` and define the trading days. An empty or absent
/// member field means member. A characteristic is joined strictly from the
/// past: the row for day t holds the latest report dated before dates[t],
/// forward-filled until the next report.
IngestResult ingest_panel(std::istream& returns, std::istream* characteristics = nullptr,
                          std::istream* membership = nullptr);

IngestResult ingest_panel_files(const std::filesystem::path& returns,
                                const std::filesystem::path& characteristics = {},
                                const std::filesystem::path& membership = {});

/// Warnings for consecutive trading days more than `max_gap_days` calendar
/// days apart (a long weekend spans 4).
std::vector<std::string> date_gap_warnings(const std::vector<std::string>& dates,
                                           int max_gap_days = 4);

/// ISO date of the calendar day before `date`.
std::string previous_calendar_day(const std::string& date);

/// Writers producing files that ingest_panel reads back to identical matrices.
/// Non-member returns are written empty. Each characteristic row t is written
/// as a report dated dates[t-1] (origin_date for t = 0).
void write_returns_csv(std::ostream& out, const MarketData& data);
void write_characteristics_csv(std::ostream& out, const MarketData& data);

}  // namespace spt
