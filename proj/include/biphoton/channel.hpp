#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <string_view>

#include "biphoton/errors.hpp"

namespace biphoton {

/// Detector channels. Fields 1 and 2 are the two emission directions; each is
/// split onto two arms (a, b) by a fiber beam splitter.
enum class Channel : std::uint8_t {
    d1a = 0,
    d1b = 1,
    d2a = 2,
    d2b = 3,
};

inline constexpr std::array<Channel, 4> all_channels{Channel::d1a, Channel::d1b, Channel::d2a,
                                                     Channel::d2b};
inline constexpr int channel_count = 4;

inline constexpr int field_of(Channel c) {
    return (static_cast<int>(c) < 2) ? 1 : 2;
}

/// Arm index within a field: 0 for 'a', 1 for 'b'.
inline constexpr int arm_of(Channel c) {
    return static_cast<int>(c) & 1;
}

inline constexpr bool same_field(Channel a, Channel b) {
    return field_of(a) == field_of(b);
}

inline Channel channel_from_index(unsigned v) {
    require(v < 4, errc::bad_channel, "channel index " + std::to_string(v) + " out of range 0-3");
    return static_cast<Channel>(v);
}

inline const char* to_string(Channel c) {
    switch (c) {
        case Channel::d1a: return "1a";
        case Channel::d1b: return "1b";
        case Channel::d2a: return "2a";
        case Channel::d2b: return "2b";
    }
    return "?";
}

/// Parses "1a", "1b", "2a", "2b" (a leading 'D'/'d' is tolerated).
inline Channel parse_channel(std::string_view s) {
    if (!s.empty() && (s.front() == 'D' || s.front() == 'd')) s.remove_prefix(1);
    if (s.size() == 2 && (s[0] == '1' || s[0] == '2') && (s[1] == 'a' || s[1] == 'b')) {
        int idx = (s[0] == '1' ? 0 : 2) + (s[1] == 'a' ? 0 : 1);
        return static_cast<Channel>(idx);
    }
    fail(errc::bad_channel, "cannot parse channel label '" + std::string(s) + "'");
}

}  // namespace biphoton
