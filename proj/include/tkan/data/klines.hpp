// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <chrono>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>

#include "tkan/data/series.hpp"

namespace tkan {

struct KlinesOptions {
  /// Scheme, host and optional port of a Binance-compatible REST API.
  std::string endpoint = "https://api.binance.com";
  std::filesystem::path cache_dir = "data";
  std::size_t max_retries = 4;
  std::chrono::milliseconds backoff{500};
  /// Minimum spacing between two requests to the endpoint.
  std::chrono::milliseconds min_interval{100};
  std::size_t page_limit = 1000;
};

struct FetchReport {
  std::size_t requests = 0;
  std::size_t rows_fetched = 0;
  std::size_t missing_hours = 0;
  bool from_cache = false;
};

/**
 * Downloads hourly klines for one symbol and keeps the quote-asset volume
 * (hourly notional) as a single-column frame.
 *
 * The cache holds one `<symbol>.csv` per symbol in `cache_dir`. Hours already
 * cached are served without network access; later hours are appended. Hours
 * absent from the exchange response are dropped and counted.
 */
class KlinesClient {
 public:
  explicit KlinesClient(KlinesOptions options);

  /// Hours in [start_hour, end_hour) (epoch hours).
  SeriesFrame fetch(const std::string& symbol, std::int64_t start_hour, std::int64_t end_hour,
                    FetchReport* report = nullptr);

  std::filesystem::path cache_path(const std::string& symbol) const;

 private:
  std::string get_with_retry(const std::string& path, FetchReport& report);

  KlinesOptions options_;
  std::chrono::steady_clock::time_point last_request_{};
};

/// Parses a klines JSON payload into (epoch hour, quote volume) rows.
std::vector<std::pair<std::int64_t, double>> parse_klines(const std::string& json_text);

}  // namespace tkan
