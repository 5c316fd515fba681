#include "netscan/parallel.hpp"

#include <algorithm>
#include <charconv>
#include <cstdlib>
#include <cstring>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

namespace netscan {

std::size_t resolve_threads(std::size_t requested) {
  if (requested > 0) return requested;
  if (const char* env = std::getenv("NETSCAN_THREADS"); env != nullptr) {
    std::size_t value = 0;
    const char* end = env + std::strlen(env);
    auto [ptr, ec] = std::from_chars(env, end, value);
    if (ec == std::errc{} && ptr == end && value > 0) return value;
  }
  return std::max<std::size_t>(1, std::thread::hardware_concurrency());
}

void parallel_for(std::size_t n, std::size_t threads,
                  const std::function<void(std::size_t, std::size_t)>& body) {
  if (n == 0) return;
  const std::size_t parts = std::clamp<std::size_t>(threads, 1, n);
  if (parts == 1) {
    body(0, n);
    return;
  }

  std::exception_ptr failure;
  std::mutex failure_mutex;
  auto run = [&](std::size_t first, std::size_t last) {
    try {
      body(first, last);
    } catch (...) {
      std::lock_guard lock(failure_mutex);
      if (!failure) failure = std::current_exception();
    }
  };

  const std::size_t chunk = n / parts;
  const std::size_t extra = n % parts;
  std::vector<std::jthread> workers;
  workers.reserve(parts - 1);
  std::size_t first = 0;
  std::size_t own_first = 0, own_last = 0;
  for (std::size_t i = 0; i < parts; ++i) {
    const std::size_t last = first + chunk + (i < extra ? 1 : 0);
    if (i == 0) {
      own_first = first;
      own_last = last;
    } else {
      workers.emplace_back(run, first, last);
    }
    first = last;
  }
  run(own_first, own_last);
  workers.clear();
  if (failure) std::rethrow_exception(failure);
}

}  // namespace netscan
