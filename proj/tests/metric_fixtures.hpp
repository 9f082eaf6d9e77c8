#pragma once

#include <string>
#include <vector>

#include "mga/eval.hpp"

// Hand-derived fixtures: expected TP/FP/FN per class computed by applying
// the collar + greedy matching rules by hand. Collars: onset 0.200 s,
// offset max(0.200 s, 20% of reference length).
namespace mga::fixtures {

struct ExpectedClass {
  std::string label;
  int tp, fp, fn;
};

struct MetricFixture {
  std::string name;
  std::vector<Event> refs;
  std::vector<Event> preds;
  std::vector<std::string> classes;
  std::vector<ExpectedClass> expected;
  double macro_f1;
};

inline std::vector<MetricFixture> metric_fixtures() {
  using E = Event;
  std::vector<MetricFixture> fx;

  fx.push_back({"match inside both collars",
                {E{"c1", 1.00, 2.00, "Dog"}},
                {E{"c1", 1.10, 2.05, "Dog"}},
                {"Dog"},
                {{"Dog", 1, 0, 0}},
                1.0});

  fx.push_back({"onset outside collar",
                {E{"c1", 1.00, 2.00, "Dog"}},
                {E{"c1", 1.30, 2.00, "Dog"}},
                {"Dog"},
                {{"Dog", 0, 1, 1}},
                0.0});

  fx.push_back({"onset differing by exactly one collar matches",
                {E{"c1", 1.00, 3.00, "Dog"}},
                {E{"c1", 1.20, 3.00, "Dog"}},
                {"Dog"},
                {{"Dog", 1, 0, 0}},
                1.0});

  fx.push_back({"offset differing by exactly one collar matches",
                {E{"c1", 5.00, 6.00, "Cat"}},
                {E{"c1", 5.00, 6.20, "Cat"}},
                {"Cat"},
                {{"Cat", 1, 0, 0}},
                1.0});

  fx.push_back({"long event widens the offset collar to 20 percent",
                {E{"c1", 0.00, 10.00, "Dog"}},
                {E{"c1", 0.10, 8.10, "Dog"}},  // offset diff 1.9 <= 2.0
                {"Dog"},
                {{"Dog", 1, 0, 0}},
                1.0});

  fx.push_back({"short event keeps the 200 ms offset floor",
                {E{"c1", 0.00, 1.00, "Dog"}},
                {E{"c1", 0.00, 1.25, "Dog"}},  // offset diff 0.25 > 0.2
                {"Dog"},
                {{"Dog", 0, 1, 1}},
                0.0});

  fx.push_back({"one ref consumes only one of two candidate preds",
                {E{"c1", 1.00, 2.00, "Dog"}},
                {E{"c1", 1.02, 2.02, "Dog"}, E{"c1", 1.05, 2.05, "Dog"}},
                {"Dog"},
                {{"Dog", 1, 1, 0}},
                2.0 / 3.0});  // P=1/2, R=1 -> F1 = 2/3

  fx.push_back({"one pred satisfies only the first of two refs",
                {E{"c1", 1.00, 2.00, "Dog"}, E{"c1", 1.05, 2.05, "Dog"}},
                {E{"c1", 1.02, 2.02, "Dog"}},
                {"Dog"},
                {{"Dog", 1, 0, 1}},
                2.0 / 3.0});

  fx.push_back({"exact equality across classes scores macro 1",
                {E{"c1", 1.0, 2.0, "Dog"}, E{"c1", 4.0, 5.0, "Cat"},
                 E{"c2", 0.5, 3.5, "Dog"}},
                {E{"c1", 1.0, 2.0, "Dog"}, E{"c1", 4.0, 5.0, "Cat"},
                 E{"c2", 0.5, 3.5, "Dog"}},
                {"Cat", "Dog"},
                {{"Cat", 1, 0, 0}, {"Dog", 2, 0, 0}},
                1.0});

  fx.push_back({"empty refs and preds leave a listed class at zero",
                {},
                {},
                {"Dog"},
                {{"Dog", 0, 0, 0}},
                0.0});

  fx.push_back({"empty predictions count every reference as a miss",
                {E{"c1", 1.0, 2.0, "Dog"}, E{"c2", 3.0, 4.0, "Dog"}},
                {},
                {"Dog"},
                {{"Dog", 0, 0, 2}},
                0.0});

  fx.push_back({"clip identity isolates otherwise matching events",
                {E{"c1", 1.0, 2.0, "Dog"}},
                {E{"c2", 1.0, 2.0, "Dog"}},
                {"Dog"},
                {{"Dog", 0, 1, 1}},
                0.0});

  fx.push_back({"labels isolate otherwise matching events",
                {E{"c1", 1.0, 2.0, "Dog"}},
                {E{"c1", 1.0, 2.0, "Cat"}},
                {"Cat", "Dog"},
                {{"Cat", 0, 1, 0}, {"Dog", 0, 0, 1}},
                0.0});

  fx.push_back({"duplicate identical refs each consume one match",
                {E{"c1", 1.0, 2.0, "Dog"}, E{"c1", 1.0, 2.0, "Dog"}},
                {E{"c1", 1.0, 2.0, "Dog"}, E{"c1", 1.0, 2.0, "Dog"}},
                {"Dog"},
                {{"Dog", 2, 0, 0}},
                1.0});

  fx.push_back({"macro mean averages matched and unmatched classes",
                {E{"c1", 1.0, 2.0, "Dog"}, E{"c1", 3.0, 4.0, "Cat"}},
                {E{"c1", 1.0, 2.0, "Dog"}, E{"c1", 6.0, 7.0, "Cat"}},
                {"Cat", "Dog"},
                {{"Cat", 0, 1, 1}, {"Dog", 1, 0, 0}},
                0.5});

  return fx;
}

}  // namespace mga::fixtures
