#pragma once

#include <string>

namespace cabs_test {

// Three units across two organs; the second is hedged.
inline const std::string kThreeUnitDoc = R"({
  "abnormalities": [
    {"name": "ground-glass opacity", "evidence": "Patchy ground-glass opacities in the right lower lobe.",
     "location": "right lower lobe", "attributes": "patchy", "certainty": "definite", "organ": "lung"},
    {"name": "fatty liver", "evidence": "Low attenuation of the liver parenchyma, possibly fatty liver.",
     "location": "liver", "attributes": "low attenuation", "certainty": "possible", "organ": "liver"},
    {"name": "pleural effusion", "evidence": "Small left pleural effusion.",
     "location": "left pleural space", "attributes": "small", "certainty": "definite", "organ": "lung"}
  ],
  "report_has_abnormality": true
})";

inline const std::string kThreeUnitReport =
    "Patchy ground-glass opacities in the right lower lobe. Low attenuation of the liver parenchyma, "
    "possibly fatty liver. Small left pleural effusion.";

}  // namespace cabs_test
