#include "lungnet/common/Labels.h"

#include "lungnet/common/Errors.h"

namespace lungnet {

std::string labelName(CycleLabel label) {
  switch (label) {
    case CycleLabel::Normal:
      return "normal";
    case CycleLabel::Crackle:
      return "crackle";
    case CycleLabel::Wheeze:
      return "wheeze";
    case CycleLabel::Both:
      return "both";
  }
  return "unknown";
}

CycleLabel parseLabel(const std::string& name) {
  for (auto label : kAllLabels) {
    if (labelName(label) == name) {
      return label;
    }
  }
  throw InputError("unknown cycle label '" + name + "'");
}

CycleLabel labelFromFlags(bool crackle, bool wheeze) {
  if (crackle && wheeze) {
    return CycleLabel::Both;
  }
  if (crackle) {
    return CycleLabel::Crackle;
  }
  return wheeze ? CycleLabel::Wheeze : CycleLabel::Normal;
}

} // namespace lungnet
