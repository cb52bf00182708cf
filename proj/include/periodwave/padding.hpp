#pragma once

#include <cstdint>

namespace periodwave {

// Maps any integer index onto [0, n) by mirror reflection without repeating
// the edge sample (numpy "reflect"), repeating the mirror as often as needed.
inline long long reflect_index(long long i, long long n) {
  if (n <= 1) return 0;
  const long long period = 2 * (n - 1);
  long long m = i % period;
  if (m < 0) m += period;
  return m < n ? m : period - m;
}

inline long long round_up(long long value, long long multiple) {
  return (value + multiple - 1) / multiple * multiple;
}

}  // namespace periodwave
