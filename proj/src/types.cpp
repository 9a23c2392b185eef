#include "bodyreg/types.hpp"

namespace bodyreg {

std::string to_string(Semantic s) {
  switch (s) {
    case Semantic::image: return "image";
    case Semantic::label: return "label";
    case Semantic::prediction: return "prediction";
    case Semantic::weights: return "weights";
    case Semantic::scores3d: return "scores3d";
  }
  throw ValidationError("unhandled semantic value");
}

Semantic semantic_from_string(const std::string& s) {
  if (s == "image") return Semantic::image;
  if (s == "label") return Semantic::label;
  if (s == "prediction") return Semantic::prediction;
  if (s == "weights") return Semantic::weights;
  if (s == "scores3d") return Semantic::scores3d;
  throw ValidationError("unknown semantic '" + s + "'");
}

}  // namespace bodyreg
