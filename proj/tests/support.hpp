#pragma once

#include <atomic>
#include <filesystem>
#include <random>
#include <string>
#include <unistd.h>
#include <vector>

#include "lsdm/params.hpp"
#include "lsdm/purchase_log.hpp"
#include "lsdm/tensor.hpp"

namespace lsdm::testing {

inline Tensor random_tensor(Tensor::Shape shape, std::mt19937_64& rng, double lo = -1.0,
                            double hi = 1.0) {
  std::uniform_real_distribution<double> u(lo, hi);
  Tensor t(std::move(shape));
  for (double& v : t.values()) v = u(rng);
  return t;
}

/// Random log: every user gets [min_events, max_events] events spread over
/// `days` days starting at `start`.
inline PurchaseLog random_log(std::mt19937_64& rng, std::size_t users, std::size_t items,
                              std::size_t min_events, std::size_t max_events, int days = 30,
                              Timestamp start = 1'600'000'000) {
  std::uniform_int_distribution<std::size_t> count(min_events, max_events);
  std::uniform_int_distribution<ItemId> item(1, static_cast<ItemId>(items));
  std::uniform_int_distribution<Timestamp> when(0, static_cast<Timestamp>(days) * 86400 - 1);
  std::vector<Event> events;
  for (UserId u = 1; u <= users; ++u) {
    const std::size_t n = count(rng);
    for (std::size_t k = 0; k < n; ++k) events.push_back({u, item(rng), start + when(rng)});
  }
  return PurchaseLog(std::move(events), users, items);
}

/// Deterministic small model with every weight drawn from [-scale, scale].
inline LsdmParams small_params(std::size_t users, std::size_t items, std::size_t dim,
                               std::vector<TimeScale> scales, std::vector<std::size_t> max_items,
                               JoinStrategy join, std::uint64_t seed = 3, double scale = 0.5,
                               bool share = false) {
  InitOptions init;
  init.seed = seed;
  init.scale = scale;
  return init_params({users, items, dim}, scales, max_items, join, share, init);
}

/// Fresh directory removed on destruction.
class TempDir {
 public:
  TempDir() {
    static std::atomic<int> counter{0};
    path_ = std::filesystem::temp_directory_path() /
            ("lsdm-test-" + std::to_string(::getpid()) + "-" + std::to_string(counter++));
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }

 private:
  std::filesystem::path path_;
};

}  // namespace lsdm::testing
