#pragma once

#include <array>
#include <string>

namespace lungnet {

/// The four annotation classes of a breathing cycle. Numeric values are the
/// class indices used by the network output.
enum class CycleLabel : int { Normal = 0, Crackle = 1, Wheeze = 2, Both = 3 };

inline constexpr int kNumClasses = 4;
inline constexpr double kCycleSampleRate = 4000.0;

inline constexpr std::array<CycleLabel, 4> kAllLabels = {
    CycleLabel::Normal, CycleLabel::Crackle, CycleLabel::Wheeze, CycleLabel::Both};

std::string labelName(CycleLabel label);
/// Inverse of labelName; throws InputError on unknown names.
CycleLabel parseLabel(const std::string& name);
/// (crackle, wheeze) flags to label: (0,0) normal, (1,0) crackle, (0,1) wheeze, (1,1) both.
CycleLabel labelFromFlags(bool crackle, bool wheeze);

inline int classIndex(CycleLabel label) {
  return static_cast<int>(label);
}

} // namespace lungnet
