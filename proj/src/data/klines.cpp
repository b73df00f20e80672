// SPDX-License-Identifier: Apache-2.0
#include "tkan/data/klines.hpp"

#include <algorithm>
#include <fstream>
#include <mutex>
#include <thread>

#include <httplib.h>
#include <json.hpp>

#include "tkan/core/errors.hpp"

namespace tkan {

namespace {

// One request at a time per process; the exchange rate-limits by IP.
std::mutex& request_mutex() {
  static std::mutex m;
  return m;
}

double as_number(const nlohmann::json& v) {
  if (v.is_string()) return std::stod(v.get<std::string>());
  return v.get<double>();
}

void append_rows(const std::filesystem::path& path, const std::string& symbol,
                 const std::vector<std::pair<std::int64_t, double>>& rows) {
  const bool fresh = !std::filesystem::exists(path);
  std::ofstream out(path, std::ios::app);
  if (!out) throw std::runtime_error("cannot write cache file " + path.string());
  out.precision(17);
  if (fresh) out << "timestamp," << symbol << '\n';
  for (const auto& [hour, value] : rows) out << hour * 3600 << ',' << value << '\n';
}

}  // namespace

std::vector<std::pair<std::int64_t, double>> parse_klines(const std::string& json_text) {
  const auto doc = nlohmann::json::parse(json_text);
  if (!doc.is_array()) throw FetchError("klines response is not a JSON array");
  std::vector<std::pair<std::int64_t, double>> rows;
  rows.reserve(doc.size());
  for (const auto& k : doc) {
    if (!k.is_array() || k.size() < 8) throw FetchError("malformed kline entry");
    const auto open_ms = k[0].get<std::int64_t>();
    rows.emplace_back(open_ms / 3'600'000, as_number(k[7]));
  }
  return rows;
}

KlinesClient::KlinesClient(KlinesOptions options) : options_(std::move(options)) {}

std::filesystem::path KlinesClient::cache_path(const std::string& symbol) const {
  return options_.cache_dir / (symbol + ".csv");
}

std::string KlinesClient::get_with_retry(const std::string& path, FetchReport& report) {
  std::lock_guard lock(request_mutex());
  httplib::Client client(options_.endpoint);
  client.set_connection_timeout(std::chrono::seconds(10));
  client.set_read_timeout(std::chrono::seconds(30));
  auto delay = options_.backoff;
  std::string last_error;
  for (std::size_t attempt = 0; attempt <= options_.max_retries; ++attempt) {
    const auto since = std::chrono::steady_clock::now() - last_request_;
    if (since < options_.min_interval) std::this_thread::sleep_for(options_.min_interval - since);
    last_request_ = std::chrono::steady_clock::now();
    ++report.requests;
    auto res = client.Get(path);
    if (res && res->status == 200) return res->body;
    last_error = res ? "HTTP " + std::to_string(res->status) : httplib::to_string(res.error());
    if (attempt < options_.max_retries) {
      std::this_thread::sleep_for(delay);
      delay *= 2;
    }
  }
  throw FetchError("GET " + options_.endpoint + path + " failed after " +
                   std::to_string(options_.max_retries + 1) + " attempts: " + last_error);
}

SeriesFrame KlinesClient::fetch(const std::string& symbol, std::int64_t start_hour,
                                std::int64_t end_hour, FetchReport* report) {
  FetchReport local;
  SeriesFrame empty;
  empty.names = {symbol};
  empty.target = symbol;
  empty.columns.resize(1);
  if (end_hour <= start_hour) {
    local.from_cache = true;
    if (report) *report = local;
    return empty;
  }

  std::filesystem::create_directories(options_.cache_dir);
  const auto path = cache_path(symbol);
  SeriesFrame cached = std::filesystem::exists(path) ? read_frame_csv(path, symbol) : empty;

  // Append-only: only hours after the last cached one are requested.
  std::int64_t next = start_hour;
  if (cached.rows() > 0) next = std::max(next, cached.timestamps.back() + 1);
  if (next < end_hour) {
    std::vector<std::pair<std::int64_t, double>> fresh;
    const auto step = static_cast<std::int64_t>(options_.page_limit);
    for (std::int64_t page = next; page < end_hour; page += step) {
      const std::int64_t page_end = std::min(end_hour, page + step);
      const std::string query = "/api/v3/klines?symbol=" + symbol + "&interval=1h&startTime=" +
                                std::to_string(page * 3'600'000) + "&endTime=" +
                                std::to_string(page_end * 3'600'000 - 1) +
                                "&limit=" + std::to_string(options_.page_limit);
      for (const auto& row : parse_klines(get_with_retry(query, local))) {
        if (row.first < page || row.first >= page_end) continue;
        if (!fresh.empty() && row.first <= fresh.back().first) continue;
        fresh.push_back(row);
      }
    }
    local.rows_fetched = fresh.size();
    append_rows(path, symbol, fresh);
    cached = read_frame_csv(path, symbol);
  } else {
    local.from_cache = true;
  }

  SeriesFrame out = empty;
  for (std::size_t r = 0; r < cached.rows(); ++r) {
    const auto t = cached.timestamps[r];
    if (t < start_hour || t >= end_hour) continue;
    out.timestamps.push_back(t);
    out.columns[0].push_back(cached.columns[0][r]);
  }
  // Hours in the requested range that never arrived.
  local.missing_hours = static_cast<std::size_t>(end_hour - start_hour) - out.rows();
  if (report) *report = local;
  return out;
}

}  // namespace tkan
