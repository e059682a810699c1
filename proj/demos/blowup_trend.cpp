// Short blow-up scan at alpha = 2: negative-energy rows concentrate, the controls stay put.
#include <cstdio>

#include "dgbo/dgbo.hpp"

int main() {
    using namespace dgbo;
    BlowupScanConfig cfg;
    cfg.alpha = 2.0;
    cfg.amplitudes = {1.02, 1.05, 1.1};
    cfg.controls = {0.95, 1.0};
    cfg.t_end = 10.0;
    const BlowupScanResult res = blowup_scan(cfg);
    std::printf("%6s %9s %9s %10s %9s %9s %6s\n", "a", "beta", "E", "status", "t_stop", "lam_min", "mono");
    for (const auto& r : res.rows)
        std::printf("%6.2f %9.4f %9.4f %10s %9.3f %9.4f %6s\n", r.amplitude, r.beta, r.energy,
                    r.failed ? "failed" : to_string(r.status), r.status_time, r.lambda_min, r.lambda_decreasing ? "yes" : "no");
    std::printf("%.1f s\n", res.seconds);
}
