// berry_spin_half: geometric phase of the spin-1/2 coherence block on the
// theta = pi/3 cone, with and without dephasing, next to the closed-system value.

#include <cmath>
#include <iomanip>
#include <iostream>
#include <numbers>

#include <holoq/holoq.hpp>

int main() {
    using namespace holoq;
    std::cout << std::setprecision(12);
    for (double beta : {0.0, 0.1, 0.25}) {
        SpinHalfModel m;
        m.channel = Channel::dephasing;
        m.beta = beta;
        const auto tracks = track_blocks(sample_family(m.path(1024), m));
        for (const auto& t : tracks) {
            if (t.degeneracy > 1) {
                // only the first member of a degenerate set; the loop covers the whole set
                if (t.label != group_members(tracks, t.group)[0].label) continue;
                const auto h = wilson_loop(group_members(tracks, t.group));
                std::cout << "beta " << beta << "  set of " << t.degeneracy << "  lambda " << t.eigenvalue[0]
                          << "  Wilson eigenvalues " << h.eigenvalues.transpose() << "\n";
                continue;
            }
            const auto ph = abelian_phase(t);
            std::cout << "beta " << beta << "  block " << t.label << "  lambda " << t.eigenvalue[0] << "  gamma "
                      << ph.gamma << "  mod 2pi " << ph.re_mod_2pi << "\n";
        }
    }
    const double theta = std::numbers::pi / 3.0;
    std::cout << "closed-system -2 pi (1 - cos theta) = " << -2.0 * std::numbers::pi * (1.0 - std::cos(theta)) << "\n";
}
