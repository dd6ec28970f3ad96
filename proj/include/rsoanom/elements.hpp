#pragma once

#include <array>
#include <cstddef>
#include <optional>
#include <string_view>

namespace rsoanom {

// The six classical elements, in model-input order.
enum class Element : std::size_t {
  kMeanMotion = 0,
  kEccentricity = 1,
  kInclination = 2,
  kRaan = 3,
  kArgPerigee = 4,
  kMeanAnomaly = 5,
};

inline constexpr std::size_t kNumElements = 6;

inline constexpr std::array<Element, kNumElements> kAllElements = {
    Element::kMeanMotion, Element::kEccentricity, Element::kInclination,
    Element::kRaan,       Element::kArgPerigee,   Element::kMeanAnomaly};

inline constexpr std::array<std::string_view, kNumElements> kElementNames = {
    "mean_motion", "eccentricity", "inclination", "raan", "arg_perigee", "mean_anomaly"};

constexpr std::size_t index_of(Element e) noexcept { return static_cast<std::size_t>(e); }
constexpr std::string_view name_of(Element e) noexcept { return kElementNames[index_of(e)]; }

inline std::optional<Element> element_from_name(std::string_view name) {
  for (std::size_t i = 0; i < kNumElements; ++i) {
    if (kElementNames[i] == name) return static_cast<Element>(i);
  }
  return std::nullopt;
}

// Angles that live on a circle and can wrap at 360 degrees.
constexpr bool is_wrapping_angle(Element e) noexcept {
  return e == Element::kRaan || e == Element::kArgPerigee || e == Element::kMeanAnomaly;
}

struct OrbitalElements {
  double mean_motion = 0.0;   // rev/day
  double eccentricity = 0.0;  // [0, 1)
  double inclination = 0.0;   // deg, [0, 180]
  double raan = 0.0;          // deg, [0, 360)
  double arg_perigee = 0.0;   // deg, [0, 360)
  double mean_anomaly = 0.0;  // deg, [0, 360)

  double operator[](Element e) const noexcept {
    switch (e) {
      case Element::kMeanMotion: return mean_motion;
      case Element::kEccentricity: return eccentricity;
      case Element::kInclination: return inclination;
      case Element::kRaan: return raan;
      case Element::kArgPerigee: return arg_perigee;
      case Element::kMeanAnomaly: return mean_anomaly;
    }
    return 0.0;
  }

  double& operator[](Element e) noexcept {
    switch (e) {
      case Element::kMeanMotion: return mean_motion;
      case Element::kEccentricity: return eccentricity;
      case Element::kInclination: return inclination;
      case Element::kRaan: return raan;
      case Element::kArgPerigee: return arg_perigee;
      case Element::kMeanAnomaly: break;
    }
    return mean_anomaly;
  }

  std::array<double, kNumElements> to_array() const noexcept {
    return {mean_motion, eccentricity, inclination, raan, arg_perigee, mean_anomaly};
  }

  bool valid() const noexcept {
    auto angle_ok = [](double a) { return a >= 0.0 && a < 360.0; };
    return mean_motion > 0.0 && eccentricity >= 0.0 && eccentricity < 1.0 && inclination >= 0.0 &&
           inclination <= 180.0 && angle_ok(raan) && angle_ok(arg_perigee) && angle_ok(mean_anomaly);
  }

  friend bool operator==(const OrbitalElements&, const OrbitalElements&) = default;
};

}  // namespace rsoanom
