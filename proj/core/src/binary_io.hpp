// Copyright Contributors to the blrf Project
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <istream>
#include <ostream>
#include <span>
#include <type_traits>
#include <vector>

namespace blrf::detail {

static_assert(std::endian::native == std::endian::little || std::endian::native == std::endian::big);

inline std::uint32_t to_le(std::uint32_t v)
{
    if constexpr (std::endian::native == std::endian::little) return v;
    return ((v & 0xffu) << 24) | ((v & 0xff00u) << 8) | ((v >> 8) & 0xff00u) | (v >> 24);
}

inline void write_u32(std::ostream& out, std::uint32_t v)
{
    const std::uint32_t le = to_le(v);
    out.write(reinterpret_cast<const char*>(&le), 4);
}

inline std::uint32_t read_u32(std::istream& in)
{
    std::uint32_t le = 0;
    in.read(reinterpret_cast<char*>(&le), 4);
    return to_le(le);
}

template <typename T>
void write_f32_array(std::ostream& out, std::span<const T> values)
{
    for (T v : values) write_u32(out, std::bit_cast<std::uint32_t>(static_cast<float>(v)));
}

template <typename T>
void write_f32_array(std::ostream& out, const std::vector<T>& values)
{
    write_f32_array(out, std::span<const T>(values));
}

template <typename T>
void read_f32_array(std::istream& in, std::span<T> values)
{
    for (T& v : values) v = static_cast<T>(std::bit_cast<float>(read_u32(in)));
}

template <typename T>
void read_f32_array(std::istream& in, std::vector<T>& values)
{
    read_f32_array(in, std::span<T>(values));
}

} // namespace blrf::detail
