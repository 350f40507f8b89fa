// velochart: velocity-based channel charting with adaptive map matching
//
// Licensed under the Apache License, Version 2.0 (the "License"); you may not
// use this file except in compliance with the License. You may obtain a copy
// of the License at http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS, WITHOUT
// WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied. See the
// License for the specific language governing permissions and limitations
// under the License.

#pragma once

#include <cstdint>
#include <cstring>
#include <istream>
#include <ostream>
#include <string>
#include <type_traits>
#include <vector>

#include "velochart/common.hpp"

// Little-endian scalar and block helpers shared by all binary artifact
// formats (dataset containers, distance matrices, checkpoints).
namespace velochart::bin {

template <typename T>
void put(std::ostream& os, T v) {
  static_assert(std::is_trivially_copyable_v<T>);
  os.write(reinterpret_cast<const char*>(&v), sizeof v);
}

template <typename T>
T get(std::istream& is, const std::string& what) {
  T v{};
  is.read(reinterpret_cast<char*>(&v), sizeof v);
  if (!is) throw io_error("truncated read: " + what);
  return v;
}

inline void put_magic(std::ostream& os, const char (&magic)[5]) {
  os.write(magic, 4);
}

inline void expect_magic(std::istream& is, const char (&magic)[5],
                         const std::string& path) {
  char buf[4] = {0, 0, 0, 0};
  is.read(buf, 4);
  if (!is || std::memcmp(buf, magic, 4) != 0) {
    throw io_error("bad magic in " + path + ", expected " + std::string(magic, 4));
  }
}

template <typename T>
void put_block(std::ostream& os, const std::vector<T>& v) {
  static_assert(std::is_trivially_copyable_v<T>);
  if (!v.empty()) {
    os.write(reinterpret_cast<const char*>(v.data()),
             static_cast<std::streamsize>(v.size() * sizeof(T)));
  }
}

template <typename T>
std::vector<T> get_block(std::istream& is, std::size_t count,
                         const std::string& what) {
  std::vector<T> v(count);
  if (count > 0) {
    is.read(reinterpret_cast<char*>(v.data()),
            static_cast<std::streamsize>(count * sizeof(T)));
    if (!is) throw io_error("truncated read: " + what);
  }
  return v;
}

inline void put_string(std::ostream& os, const std::string& s) {
  put<std::uint32_t>(os, static_cast<std::uint32_t>(s.size()));
  os.write(s.data(), static_cast<std::streamsize>(s.size()));
}

inline std::string get_string(std::istream& is, const std::string& what) {
  const auto n = get<std::uint32_t>(is, what);
  std::string s(n, '\0');
  if (n > 0) {
    is.read(s.data(), n);
    if (!is) throw io_error("truncated read: " + what);
  }
  return s;
}

}  // namespace velochart::bin
