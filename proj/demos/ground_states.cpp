// Ground states across the dispersion range, with their certification numbers.
#include <cstdio>

#include "dgbo/dgbo.hpp"

int main() {
    using namespace dgbo;
    std::printf("%6s %10s %12s %10s %10s %10s\n", "alpha", "Q(0)", "mass", "pohozaev", "j1(Q)", "mu0");
    for (double a : {2.0, 1.9, 1.75, 1.5}) {
        const GroundState gs = solve_ground_state(a, GridSpec(51.2, 1024));
        const double mu0 = ground_mode(LinearizedOperator(gs)).value;
        std::printf("%6.2f %10.6f %12.8f %10.1e %10.6f %10.6f\n", a, gs.Q[gs.grid.origin_index()], gs.mass(),
                    gs.pohozaev.max(), j1(gs.Q, a), mu0);
    }
    std::printf("alpha = 2 closed form: Q(0) = 15^(1/4) = %.6f, mu0 = -8\n", std::pow(15.0, 0.25));
}
