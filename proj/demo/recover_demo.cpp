// Simulates a moving sensor network, corrupts it and recovers it with each
// method. Prints PSNR against the truth.
#include "tvgsr/bench_harness.hpp"
#include "tvgsr/recovery.hpp"
#include "tvgsr/synthetic_world.hpp"

#include <cstdio>

int main() {
  using namespace tvgsr;
  const auto world = simulate(64, 100, 0.5, make_field(FieldVariant::Smooth, 1), 1);
  const auto data = corrupt(world.truth, {0.05, 0.05, 0.05, 101});
  std::printf("observation  %.2f dB\n", psnr(world.truth.values(), data.obs.data()));

  RecoverOptions opts;
  opts.auto_gamma2 = true;
  for (MethodId id : kAllMethods) {
    // lambda only matters for the combined methods G..J.
    const double lambda = id >= MethodId::G ? 3.0 : 1.0;
    const auto r = recover(data.obs, world.graphs, MethodSpec::of(id, lambda), {}, opts);
    std::printf("method %c     %.2f dB  (%d iterations)\n", method_letter(id), psnr(world.truth.values(), r.Y.values()),
                r.trace.iterations);
  }
}
