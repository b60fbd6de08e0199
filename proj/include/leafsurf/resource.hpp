#pragma once

// Resource accounting for the benchmark harness.
//
// Two ways to attribute peak memory to one reconstruction phase:
//  * ChildProcess  - fork, run the phase alone in the child, read the
//    child's resident-set high-water mark (VmHWM reset via clear_refs when
//    the kernel allows, otherwise ru_maxrss deltas). Honest OS-level
//    numbers with full isolation between methods.
//  * AllocCounter  - same-process global operator new/delete counters with
//    a per-phase peak reset. Approximate (heap allocations only), for
//    kernels and sandboxes that do not track per-process RSS.
//
// CPU time is process CPU (user + system) of the phase in either mode.
//
// Exactly one translation unit per binary that wants AllocCounter must
// define LEAFSURF_ALLOC_METER_IMPL before including this header; without it
// the counter reports itself unavailable.

#include <atomic>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <functional>
#include <new>
#include <string>

#include <malloc.h>
#include <sys/resource.h>
#include <sys/wait.h>
#include <unistd.h>

#include "leafsurf/geo.hpp"

namespace leafsurf::bench {

struct alloc_meter {
  static std::atomic<long long>& current() {
    static std::atomic<long long> v{0};
    return v;
  }
  static std::atomic<long long>& peak() {
    static std::atomic<long long> v{0};
    return v;
  }
  static std::atomic<bool>& installed() {
    static std::atomic<bool> v{false};
    return v;
  }

  static void on_alloc(void* p) {
    if (!p) return;
    long long sz = static_cast<long long>(malloc_usable_size(p));
    long long now = current().fetch_add(sz, std::memory_order_relaxed) + sz;
    long long prev = peak().load(std::memory_order_relaxed);
    while (now > prev &&
           !peak().compare_exchange_weak(prev, now, std::memory_order_relaxed)) {
    }
  }
  static void on_free(void* p) {
    if (!p) return;
    current().fetch_sub(static_cast<long long>(malloc_usable_size(p)),
                        std::memory_order_relaxed);
  }

  static long long begin_phase() {
    long long base = current().load(std::memory_order_relaxed);
    peak().store(base, std::memory_order_relaxed);
    return base;
  }
  static long long peak_delta(long long base) {
    return std::max(0LL, peak().load(std::memory_order_relaxed) - base);
  }
};

inline double process_cpu_seconds() {
  struct rusage u;
  if (getrusage(RUSAGE_SELF, &u) != 0) return 0.0;
  return u.ru_utime.tv_sec + 1e-6 * u.ru_utime.tv_usec + u.ru_stime.tv_sec +
         1e-6 * u.ru_stime.tv_usec;
}

namespace detail_resource {

inline long read_status_kb(const char* field) {
  FILE* f = std::fopen("/proc/self/status", "r");
  if (!f) return -1;
  char line[256];
  long value = -1;
  std::size_t flen = std::strlen(field);
  while (std::fgets(line, sizeof(line), f)) {
    if (std::strncmp(line, field, flen) == 0) {
      value = std::atol(line + flen);
      break;
    }
  }
  std::fclose(f);
  return value;
}

inline bool reset_hwm() {
  FILE* f = std::fopen("/proc/self/clear_refs", "w");
  if (!f) return false;
  bool ok = std::fputs("5", f) >= 0;
  std::fclose(f);
  return ok;
}

inline long long child_peak_bytes_baseline() {
  long hwm = read_status_kb("VmHWM:");
  if (hwm >= 0) return hwm * 1024LL;
  struct rusage u;
  if (getrusage(RUSAGE_SELF, &u) == 0) return u.ru_maxrss * 1024LL;
  return -1;
}

}  // namespace detail_resource

enum class RamMode { ChildProcess, AllocCounter };

inline const char* ram_mode_name(RamMode m) {
  return m == RamMode::ChildProcess ? "child-rss" : "alloc-counter(approx)";
}

/// Probes once whether the kernel attributes growing RSS to a forked child.
inline bool child_rss_accounting_works() {
  int pipefd[2];
  if (pipe(pipefd) != 0) return false;
  pid_t pid = fork();
  if (pid < 0) {
    close(pipefd[0]);
    close(pipefd[1]);
    return false;
  }
  if (pid == 0) {
    close(pipefd[0]);
    detail_resource::reset_hwm();
    long long base = detail_resource::child_peak_bytes_baseline();
    const std::size_t probe = 16u << 20;
    volatile char* block = static_cast<char*>(std::malloc(probe));
    if (block)
      for (std::size_t i = 0; i < probe; i += 512) block[i] = 1;
    long long after = detail_resource::child_peak_bytes_baseline();
    long long delta = (base >= 0 && after >= 0) ? after - base : -1;
    (void)!write(pipefd[1], &delta, sizeof(delta));
    _exit(0);
  }
  close(pipefd[1]);
  long long delta = -1;
  (void)!read(pipefd[0], &delta, sizeof(delta));
  close(pipefd[0]);
  int status = 0;
  waitpid(pid, &status, 0);
  return delta >= (8 << 20);
}

inline RamMode detect_ram_mode() {
  static RamMode mode = [] {
    if (child_rss_accounting_works()) return RamMode::ChildProcess;
    if (!alloc_meter::installed().load())
      std::fprintf(stderr,
                   "resource: no RSS accounting and no alloc counter in this "
                   "binary; peak RAM will read 0\n");
    return RamMode::AllocCounter;
  }();
  return mode;
}

inline RamMode ram_mode_from_config_string(const std::string& s) {
  if (s == "child") return RamMode::ChildProcess;
  if (s == "alloc") return RamMode::AllocCounter;
  return detect_ram_mode();  // "auto"
}

struct PhaseMetrics {
  double cpu_seconds = 0.0;
  long long peak_ram_bytes = 0;
  bool ok = true;
  std::string error;
};

/// Runs `phase` and reports its CPU time and peak memory. In ChildProcess
/// mode the phase executes (exactly once) in a forked child; `payload` is
/// whatever the phase wants to hand back (fixed-size, trivially copyable).
template <typename Payload>
PhaseMetrics run_metered_phase(RamMode mode,
                               const std::function<Payload()>& phase,
                               Payload& payload) {
  PhaseMetrics metrics;
  if (mode == RamMode::AllocCounter) {
    long long base = alloc_meter::begin_phase();
    double cpu0 = process_cpu_seconds();
    try {
      payload = phase();
    } catch (const std::exception& e) {
      metrics.ok = false;
      metrics.error = e.what();
    }
    metrics.cpu_seconds = process_cpu_seconds() - cpu0;
    metrics.peak_ram_bytes = alloc_meter::peak_delta(base);
    return metrics;
  }

  struct Wire {
    int ok;
    double cpu;
    long long peak;
    Payload payload;
    char error[240];
  };
  int pipefd[2];
  if (pipe(pipefd) != 0) throw IoError("pipe failed for metered phase");
  pid_t pid = fork();
  if (pid < 0) {
    close(pipefd[0]);
    close(pipefd[1]);
    throw IoError("fork failed for metered phase");
  }
  if (pid == 0) {
    close(pipefd[0]);
    Wire wire{};
    detail_resource::reset_hwm();
    long long base = detail_resource::child_peak_bytes_baseline();
    double cpu0 = process_cpu_seconds();
    try {
      wire.payload = phase();
      wire.ok = 1;
    } catch (const std::exception& e) {
      wire.ok = 0;
      std::strncpy(wire.error, e.what(), sizeof(wire.error) - 1);
    }
    wire.cpu = process_cpu_seconds() - cpu0;
    long long after = detail_resource::child_peak_bytes_baseline();
    wire.peak = (base >= 0 && after >= 0) ? std::max(0LL, after - base) : 0;
    (void)!write(pipefd[1], &wire, sizeof(wire));
    _exit(0);
  }
  close(pipefd[1]);
  Wire wire{};
  ssize_t got = 0;
  char* dst = reinterpret_cast<char*>(&wire);
  while (got < static_cast<ssize_t>(sizeof(wire))) {
    ssize_t n = read(pipefd[0], dst + got, sizeof(wire) - got);
    if (n <= 0) break;
    got += n;
  }
  close(pipefd[0]);
  int status = 0;
  waitpid(pid, &status, 0);
  if (got != static_cast<ssize_t>(sizeof(wire))) {
    metrics.ok = false;
    metrics.error = "metered child crashed before reporting";
    return metrics;
  }
  metrics.ok = wire.ok != 0;
  metrics.error = wire.error;
  metrics.cpu_seconds = wire.cpu;
  metrics.peak_ram_bytes = wire.peak;
  payload = wire.payload;
  return metrics;
}

}  // namespace leafsurf::bench

#ifdef LEAFSURF_ALLOC_METER_IMPL
// Global allocation hooks: every new/delete in this binary updates the
// counters. Definitions are intentionally non-inline and must appear in
// exactly one translation unit.

namespace {
struct LeafsurfAllocMeterMarker {
  LeafsurfAllocMeterMarker() {
    leafsurf::bench::alloc_meter::installed().store(true);
  }
} leafsurf_alloc_meter_marker;
}  // namespace

void* operator new(std::size_t size) {
  void* p = std::malloc(size ? size : 1);
  if (!p) throw std::bad_alloc();
  leafsurf::bench::alloc_meter::on_alloc(p);
  return p;
}
void* operator new[](std::size_t size) { return ::operator new(size); }
void* operator new(std::size_t size, const std::nothrow_t&) noexcept {
  void* p = std::malloc(size ? size : 1);
  if (p) leafsurf::bench::alloc_meter::on_alloc(p);
  return p;
}
void* operator new[](std::size_t size, const std::nothrow_t& t) noexcept {
  return ::operator new(size, t);
}
void* operator new(std::size_t size, std::align_val_t align) {
  std::size_t a = static_cast<std::size_t>(align);
  std::size_t sz = (size + a - 1) / a * a;
  void* p = std::aligned_alloc(a, sz ? sz : a);
  if (!p) throw std::bad_alloc();
  leafsurf::bench::alloc_meter::on_alloc(p);
  return p;
}
void* operator new[](std::size_t size, std::align_val_t align) {
  return ::operator new(size, align);
}
void* operator new(std::size_t size, std::align_val_t align,
                   const std::nothrow_t&) noexcept {
  std::size_t a = static_cast<std::size_t>(align);
  std::size_t sz = (size + a - 1) / a * a;
  void* p = std::aligned_alloc(a, sz ? sz : a);
  if (p) leafsurf::bench::alloc_meter::on_alloc(p);
  return p;
}
void* operator new[](std::size_t size, std::align_val_t align,
                     const std::nothrow_t& t) noexcept {
  return ::operator new(size, align, t);
}

void operator delete(void* p) noexcept {
  leafsurf::bench::alloc_meter::on_free(p);
  std::free(p);
}
void operator delete[](void* p) noexcept { ::operator delete(p); }
void operator delete(void* p, std::size_t) noexcept { ::operator delete(p); }
void operator delete[](void* p, std::size_t) noexcept { ::operator delete(p); }
void operator delete(void* p, const std::nothrow_t&) noexcept {
  ::operator delete(p);
}
void operator delete[](void* p, const std::nothrow_t&) noexcept {
  ::operator delete(p);
}
void operator delete(void* p, std::align_val_t) noexcept {
  ::operator delete(p);
}
void operator delete[](void* p, std::align_val_t) noexcept {
  ::operator delete(p);
}
void operator delete(void* p, std::size_t, std::align_val_t) noexcept {
  ::operator delete(p);
}
void operator delete[](void* p, std::size_t, std::align_val_t) noexcept {
  ::operator delete(p);
}
void operator delete(void* p, std::align_val_t, const std::nothrow_t&) noexcept {
  ::operator delete(p);
}
void operator delete[](void* p, std::align_val_t,
                       const std::nothrow_t&) noexcept {
  ::operator delete(p);
}
#endif  // LEAFSURF_ALLOC_METER_IMPL
