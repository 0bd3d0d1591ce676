#include "spt/ingest.hpp"

#include "spt/csv.hpp"
#include "spt/errors.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <map>
#include <ostream>
#include <set>
#include <unordered_map>

namespace spt {

namespace {

using std::chrono::sys_days;

bool parse_iso(const std::string& s, sys_days& out) {
  int y = 0;
  unsigned m = 0;
  unsigned d = 0;
  char tail = 0;
  if (s.size() != 10 || std::sscanf(s.c_str(), "%4d-%2u-%2u%c", &y, &m, &d, &tail) != 3) {
    return false;
  }
  const std::chrono::year_month_day ymd{std::chrono::year{y}, std::chrono::month{m},
                                        std::chrono::day{d}};
  if (!ymd.ok()) return false;
  out = ymd;
  return true;
}

std::string checked_date(std::string_view field, std::size_t line) {
  std::string s(field);
  sys_days parsed;
  if (!parse_iso(s, parsed)) {
    throw DataError("line " + std::to_string(line) + ": invalid date '" + s + "'");
  }
  return s;
}

std::string format_iso(sys_days d) {
  const std::chrono::year_month_day ymd{d};
  char buf[16];
  std::snprintf(buf, sizeof buf, "%04d-%02u-%02u", static_cast<int>(ymd.year()),
                static_cast<unsigned>(ymd.month()), static_cast<unsigned>(ymd.day()));
  return buf;
}

std::vector<std::string_view> read_row(csv::Reader& reader, const std::string& line,
                                       std::size_t fields, const char* file) {
  auto f = csv::split(line);
  if (f.size() != fields) {
    throw DataError(std::string(file) + " line " + std::to_string(reader.line_number()) +
                    ": expected " + std::to_string(fields) + " fields, got " +
                    std::to_string(f.size()));
  }
  return f;
}

struct ReturnRow {
  std::string date;
  std::size_t asset;
  double value;
  bool member;
};

struct Report {
  std::string date;
  double value;
  std::size_t line;
};

}  // namespace

std::string previous_calendar_day(const std::string& date) {
  sys_days d;
  if (!parse_iso(date, d)) throw DataError("invalid date '" + date + "'");
  return format_iso(d - std::chrono::days{1});
}

std::vector<std::string> date_gap_warnings(const std::vector<std::string>& dates,
                                           int max_gap_days) {
  std::vector<std::string> warnings;
  for (std::size_t k = 1; k < dates.size(); ++k) {
    sys_days a;
    sys_days b;
    if (!parse_iso(dates[k - 1], a) || !parse_iso(dates[k], b)) continue;
    const auto gap = (b - a).count();
    if (gap > max_gap_days) {
      warnings.push_back("gap of " + std::to_string(gap) + " calendar days between " +
                         dates[k - 1] + " and " + dates[k]);
    }
  }
  return warnings;
}

IngestResult ingest_panel(std::istream& returns, std::istream* characteristics,
                          std::istream* membership) {
  IngestResult result;
  MarketData& data = result.data;

  csv::Reader reader(returns);
  std::string line;
  if (!reader.next(line)) throw DataError("returns file is empty");
  const auto header = csv::split(line);
  const std::size_t c_date = csv::column(header, "date");
  const std::size_t c_asset = csv::column(header, "asset_id");
  const std::size_t c_ret = csv::column(header, "return");
  const bool has_member = std::find(header.begin(), header.end(), "member") != header.end();
  const std::size_t c_member = has_member ? csv::column(header, "member") : 0;

  std::unordered_map<std::string, std::size_t> asset_index;
  std::vector<ReturnRow> rows;
  std::set<std::string> date_set;
  while (reader.next(line)) {
    const auto f = read_row(reader, line, header.size(), "returns");
    const std::size_t ln = reader.line_number();
    ReturnRow row;
    row.date = checked_date(f[c_date], ln);
    const std::string id(f[c_asset]);
    if (id.empty()) throw DataError("returns line " + std::to_string(ln) + ": empty asset id");
    auto [it, inserted] = asset_index.emplace(id, data.panel.asset_ids.size());
    if (inserted) data.panel.asset_ids.push_back(id);
    row.asset = it->second;
    row.member = has_member ? csv::parse_bool(f[c_member], ln, true) : true;
    if (f[c_ret].empty()) {
      if (row.member) {
        throw DataError("returns line " + std::to_string(ln) + ": missing return for member " + id);
      }
      row.value = 0.0;
    } else {
      row.value = csv::parse_double(f[c_ret], ln);
    }
    date_set.insert(row.date);
    rows.push_back(std::move(row));
  }
  if (rows.empty()) throw DataError("returns file has no data rows");

  data.panel.dates.assign(date_set.begin(), date_set.end());
  std::unordered_map<std::string, Eigen::Index> date_index;
  for (std::size_t k = 0; k < data.panel.dates.size(); ++k) {
    date_index.emplace(data.panel.dates[k], static_cast<Eigen::Index>(k));
  }
  const auto t_days = static_cast<Eigen::Index>(data.panel.dates.size());
  const auto n = static_cast<Eigen::Index>(data.panel.asset_ids.size());
  data.panel.returns = Eigen::MatrixXd::Zero(t_days, n);
  data.panel.member = MembershipMatrix::Constant(t_days, n, false);
  Eigen::Array<bool, Eigen::Dynamic, Eigen::Dynamic> seen =
      Eigen::Array<bool, Eigen::Dynamic, Eigen::Dynamic>::Constant(t_days, n, false);
  for (const auto& row : rows) {
    const Eigen::Index t = date_index.at(row.date);
    const auto i = static_cast<Eigen::Index>(row.asset);
    if (seen(t, i)) {
      throw DataError("returns: duplicate row for " + data.panel.asset_ids[row.asset] + " on " +
                      row.date);
    }
    seen(t, i) = true;
    data.panel.returns(t, i) = row.value;
    data.panel.member(t, i) = row.member;
  }

  if (membership != nullptr) {
    csv::Reader mreader(*membership);
    if (!mreader.next(line)) throw DataError("membership file is empty");
    const auto mh = csv::split(line);
    const std::size_t m_date = csv::column(mh, "date");
    const std::size_t m_asset = csv::column(mh, "asset_id");
    const std::size_t m_member = csv::column(mh, "member");
    while (mreader.next(line)) {
      const auto f = read_row(mreader, line, mh.size(), "membership");
      const std::size_t ln = mreader.line_number();
      const std::string date = checked_date(f[m_date], ln);
      const auto dt = date_index.find(date);
      const auto at = asset_index.find(std::string(f[m_asset]));
      if (dt == date_index.end() || at == asset_index.end()) {
        throw DataError("membership line " + std::to_string(ln) +
                        ": date or asset not present in the returns file");
      }
      const bool member = csv::parse_bool(f[m_member], ln, true);
      if (member && !seen(dt->second, static_cast<Eigen::Index>(at->second))) {
        throw DataError("membership line " + std::to_string(ln) + ": member without a return");
      }
      data.panel.member(dt->second, static_cast<Eigen::Index>(at->second)) = member;
    }
  }

  std::string earliest_report;
  if (characteristics != nullptr) {
    csv::Reader creader(*characteristics);
    if (!creader.next(line)) throw DataError("characteristics file is empty");
    const auto ch = csv::split(line);
    const std::size_t k_date = csv::column(ch, "date");
    const std::size_t k_asset = csv::column(ch, "asset_id");
    const std::size_t k_name = csv::column(ch, "name");
    const std::size_t k_value = csv::column(ch, "value");
    std::map<std::string, std::vector<std::vector<Report>>> reports;
    while (creader.next(line)) {
      const auto f = read_row(creader, line, ch.size(), "characteristics");
      const std::size_t ln = creader.line_number();
      const auto at = asset_index.find(std::string(f[k_asset]));
      if (at == asset_index.end()) {
        throw DataError("characteristics line " + std::to_string(ln) + ": unknown asset '" +
                        std::string(f[k_asset]) + "'");
      }
      const std::string name(f[k_name]);
      if (name.empty()) {
        throw DataError("characteristics line " + std::to_string(ln) + ": empty name");
      }
      auto& per_asset = reports[name];
      per_asset.resize(static_cast<std::size_t>(n));
      per_asset[at->second].push_back(
          {checked_date(f[k_date], ln), csv::parse_double(f[k_value], ln), ln});
    }
    for (auto& [name, per_asset] : reports) {
      Eigen::MatrixXd values =
          Eigen::MatrixXd::Constant(t_days, n, std::numeric_limits<double>::quiet_NaN());
      for (Eigen::Index i = 0; i < n; ++i) {
        auto& list = per_asset[static_cast<std::size_t>(i)];
        std::stable_sort(list.begin(), list.end(),
                         [](const Report& a, const Report& b) { return a.date < b.date; });
        for (std::size_t r = 1; r < list.size(); ++r) {
          if (list[r].date == list[r - 1].date) {
            throw DataError("characteristics line " + std::to_string(list[r].line) +
                            ": second report of '" + name + "' for the same asset and date");
          }
        }
        std::size_t next = 0;
        double current = std::numeric_limits<double>::quiet_NaN();
        for (Eigen::Index t = 0; t < t_days; ++t) {
          // Only reports dated strictly before the decision day are visible.
          while (next < list.size() && list[next].date < data.panel.dates[static_cast<std::size_t>(t)]) {
            current = list[next].value;
            ++next;
          }
          values(t, i) = current;
        }
        // The latest pre-sample report date serves as the panel origin.
        for (const auto& rep : list) {
          if (rep.date < data.panel.dates.front() && rep.date > earliest_report) {
            earliest_report = rep.date;
          }
        }
      }
      data.characteristics.emplace(name, std::move(values));
    }
  }
  data.origin_date =
      earliest_report.empty() ? previous_calendar_day(data.panel.dates.front()) : earliest_report;
  data.validate();
  result.warnings = date_gap_warnings(data.panel.dates);
  return result;
}

IngestResult ingest_panel_files(const std::filesystem::path& returns,
                                const std::filesystem::path& characteristics,
                                const std::filesystem::path& membership) {
  auto open = [](const std::filesystem::path& p) {
    std::ifstream in(p);
    if (!in) throw DataError("cannot open '" + p.string() + "'");
    return in;
  };
  std::ifstream r = open(returns);
  std::ifstream c;
  std::ifstream m;
  if (!characteristics.empty()) c = open(characteristics);
  if (!membership.empty()) m = open(membership);
  return ingest_panel(r, characteristics.empty() ? nullptr : &c,
                      membership.empty() ? nullptr : &m);
}

void write_returns_csv(std::ostream& out, const MarketData& data) {
  out << "date,asset_id,return,member\n";
  for (Eigen::Index t = 0; t < data.days(); ++t) {
    for (Eigen::Index i = 0; i < data.assets(); ++i) {
      const bool member = data.panel.member(t, i);
      out << data.panel.dates[static_cast<std::size_t>(t)] << ','
          << data.panel.asset_ids[static_cast<std::size_t>(i)] << ','
          << (member ? csv::format_double(data.panel.returns(t, i)) : std::string()) << ','
          << (member ? 1 : 0) << '\n';
    }
  }
}

void write_characteristics_csv(std::ostream& out, const MarketData& data) {
  out << "date,asset_id,name,value\n";
  for (const auto& [name, values] : data.characteristics) {
    for (Eigen::Index t = 0; t < data.days(); ++t) {
      const std::string& date =
          t == 0 ? data.origin_date : data.panel.dates[static_cast<std::size_t>(t - 1)];
      for (Eigen::Index i = 0; i < data.assets(); ++i) {
        if (!std::isfinite(values(t, i))) continue;
        out << date << ',' << data.panel.asset_ids[static_cast<std::size_t>(i)] << ',' << name
            << ',' << csv::format_double(values(t, i)) << '\n';
      }
    }
  }
}

}  // namespace spt
