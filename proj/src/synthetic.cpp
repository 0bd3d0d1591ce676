#include "spt/synthetic.hpp"

#include "spt/rng.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <stdexcept>

namespace spt {

namespace {

std::string iso_date(std::chrono::sys_days d) {
  const std::chrono::year_month_day ymd{d};
  char buf[16];
  std::snprintf(buf, sizeof buf, "%04d-%02u-%02u", static_cast<int>(ymd.year()),
                static_cast<unsigned>(ymd.month()), static_cast<unsigned>(ymd.day()));
  return buf;
}

}  // namespace

std::vector<std::string> trading_calendar(int first_year, int years, int days_per_year) {
  using namespace std::chrono;
  if (years < 1) throw std::invalid_argument("calendar needs at least one year");
  if (days_per_year < 1 || days_per_year > 260) {
    throw std::invalid_argument("days per year must lie in [1, 260]");
  }
  std::vector<std::string> dates;
  dates.reserve(static_cast<std::size_t>(years) * static_cast<std::size_t>(days_per_year));
  for (int y = first_year; y < first_year + years; ++y) {
    std::vector<sys_days> weekdays;
    const sys_days end = year_month_day{year{y + 1}, January, day{1}};
    for (sys_days d = year_month_day{year{y}, January, day{1}}; d < end; d += days{1}) {
      const unsigned wd = weekday{d}.c_encoding();
      if (wd != 0 && wd != 6) weekdays.push_back(d);
    }
    const auto total = static_cast<long>(weekdays.size());
    const long drop = total - days_per_year;
    long next_drop = 0;
    for (long k = 0; k < total; ++k) {
      // Drop positions floor((j + 1/2) * total / drop), j = 0..drop-1.
      if (next_drop < drop && k == ((2 * next_drop + 1) * total) / (2 * drop)) {
        ++next_drop;
        continue;
      }
      dates.push_back(iso_date(weekdays[static_cast<std::size_t>(k)]));
    }
  }
  return dates;
}

void SyntheticPanelConfig::validate() const {
  if (assets < 2) throw std::invalid_argument("synthetic panel needs at least two assets");
  if (years < 1) throw std::invalid_argument("synthetic panel needs at least one year");
  if (!(daily_vol >= 0.0)) throw std::invalid_argument("volatility must be nonnegative");
  if (roa_report_days < 1) throw std::invalid_argument("ROA report interval must be positive");
  if (!(cap_spread >= 1.0)) throw std::invalid_argument("cap spread must be at least 1");
}

MarketData simulate_panel(const SyntheticPanelConfig& config) {
  config.validate();
  const Eigen::Index n = config.assets;
  MarketData data;
  data.panel.dates = trading_calendar(config.first_year, config.years, config.days_per_year);
  data.origin_date = trading_calendar(config.first_year - 1, 1, config.days_per_year).back();
  const auto t_days = static_cast<Eigen::Index>(data.panel.dates.size());
  for (Eigen::Index i = 0; i < n; ++i) {
    data.panel.asset_ids.push_back("A" + std::to_string(i + 1));
  }
  data.panel.returns.resize(t_days, n);
  data.panel.member = MembershipMatrix::Constant(t_days, n, true);
  Eigen::MatrixXd cap(t_days, n);
  Eigen::MatrixXd roa(t_days, n);

  Rng rng(config.seed);
  Eigen::VectorXd x(n);
  for (Eigen::Index i = 0; i < n; ++i) x[i] = std::exp(rng.uniform() * std::log(config.cap_spread));
  Eigen::VectorXd last_roa(n);
  const double log_drift = config.daily_drift - 0.5 * config.daily_vol * config.daily_vol;
  for (Eigen::Index t = 0; t < t_days; ++t) {
    if (t % config.roa_report_days == 0) {
      for (Eigen::Index i = 0; i < n; ++i) last_roa[i] = rng.normal(0.05, 0.05);
    }
    cap.row(t) = x.transpose();
    roa.row(t) = last_roa.transpose();
    Eigen::Index smallest = 0;
    Eigen::Index best_roa = 0;
    x.minCoeff(&smallest);
    last_roa.maxCoeff(&best_roa);
    for (Eigen::Index i = 0; i < n; ++i) {
      double r = std::exp(log_drift + config.daily_vol * rng.normal()) - 1.0;
      if (i == smallest) r += config.small_cap_premium;
      if (i == best_roa) r += config.roa_premium;
      data.panel.returns(t, i) = r;
      x[i] *= 1.0 + r;
    }
  }
  data.characteristics[kCapCharacteristic] = std::move(cap);
  data.characteristics["roa"] = std::move(roa);
  return data;
}

}  // namespace spt
