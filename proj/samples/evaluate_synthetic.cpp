// Builds a synthetic tumour, fakes three noisy model predictions, votes them
// and prints Dice / HD95 per region for each member and for the ensemble.
//
//   ./sample_evaluate [seed]

#include <cstdio>
#include <cstdlib>
#include <random>

#include "brainnet/brainnet.hpp"

using namespace brainnet;

namespace {

LabelVolume sphere_tumour(Dims d) {
  LabelVolume lv(d, Spacing{1.0, 1.0, 1.5});
  const double cx = d.nx / 2.0, cy = d.ny / 2.0, cz = d.nz / 2.0;
  for (std::size_t z = 0; z < d.nz; ++z)
    for (std::size_t y = 0; y < d.ny; ++y)
      for (std::size_t x = 0; x < d.nx; ++x) {
        const double r = std::hypot(x - cx, y - cy, z - cz);
        lv(x, y, z) = r < 4 ? Label::NCR : r < 7 ? Label::ET : r < 11 ? Label::ED : Label::Else;
      }
  return lv;
}

LabelVolume corrupt(const LabelVolume& gt, std::mt19937_64& rng, double p) {
  std::bernoulli_distribution flip(p);
  std::uniform_int_distribution<std::size_t> pick(0, 3);
  LabelVolume out = gt;
  for (auto& v : out)
    if (flip(rng)) v = kAllLabels[pick(rng)];
  return out;
}

void print(const char* name, const SubjectMetrics& m) {
  std::printf("%-10s", name);
  for (const auto& r : m)
    if (r.hd95) std::printf("  %s dice %.3f hd95 %6.3f", std::string(to_string(r.region)).c_str(), r.dice, *r.hd95);
    else std::printf("  %s dice %.3f hd95  undef", std::string(to_string(r.region)).c_str(), r.dice);
  std::printf("\n");
}

}  // namespace

int main(int argc, char** argv) {
  std::mt19937_64 rng(argc > 1 ? std::strtoull(argv[1], nullptr, 10) : 7);
  const auto gt = sphere_tumour({32, 32, 24});
  EnsembleSet es;
  for (int i = 0; i < 3; ++i) {
    es.members.push_back(corrupt(gt, rng, 0.15));
    print(("member " + std::to_string(i)).c_str(), evaluate_subject(gt, es.members.back()));
  }
  print("ensemble", evaluate_subject(gt, majority_vote(es)));
}
