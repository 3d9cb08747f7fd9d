// Prints the deformed rate around the vanishing point of mu(x) = 4|x - 1/2|
// next to the uniform-design rate.

#include <cstdio>

#include "supreg/rate.hpp"

int main() {
  using namespace supreg;
  const HolderSpec spec{1.0, 1.0, 1.0};
  const DesignDensity cusp = DesignDensity::power_cusp(0.5, 1.0);
  const DesignDensity uniform = DesignDensity::uniform();
  for (double n : {1e3, 1e4, 1e5}) {
    std::printf("n = %.0f\n%8s %12s %12s %10s\n", n, "x", "r_cusp", "r_uniform", "alpha");
    const RateCurve c = rate_curve(cusp, spec, 1.0, n, uniform_grid(11));
    const RateCurve u = rate_curve(uniform, spec, 1.0, n, uniform_grid(11));
    for (std::size_t j = 0; j < c.size(); ++j)
      std::printf("%8.3f %12.6f %12.6f %10.5f\n", c.x[j], c.rate[j], u.rate[j], c.alpha[j]);
  }
  return 0;
}
