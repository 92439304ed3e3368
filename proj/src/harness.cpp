#include "tsvc/harness.hpp"

#include <algorithm>
#include <cstdio>
#include <stdexcept>
#include <thread>

namespace tsvc {

std::vector<SweepPoint> rd_sweep(const std::vector<Frame>& frames, const CodecConfig& base, const SweepGrid& grid,
                                 int threads) {
    if (grid.q1.empty() || grid.q2.empty() || grid.t.empty())
        throw std::invalid_argument("rd_sweep: every grid axis needs at least one value");
    if (frames.empty()) throw std::invalid_argument("rd_sweep: no frames");

    const int n_q2 = static_cast<int>(grid.q2.size());
    const int n_t = static_cast<int>(grid.t.size());
    const int count = static_cast<int>(grid.q1.size()) * n_q2 * n_t;

    // Grid points are independent encodes, so the thread budget goes to the
    // grid first; whatever is left over parallelizes blocks inside each encode.
    const int budget = std::max(1, threads > 0 ? threads : static_cast<int>(std::thread::hardware_concurrency()));
    const int outer = std::min(budget, count);
    const int inner = std::max(1, budget / outer);

    std::vector<SweepPoint> points(static_cast<std::size_t>(count));
    detail::parallel_for(count, outer, [&](int i) {
        CodecConfig cfg = base;
        cfg.q1 = grid.q1[static_cast<std::size_t>(i / (n_q2 * n_t))];
        cfg.q2 = grid.q2[static_cast<std::size_t>((i / n_t) % n_q2)];
        cfg.t = grid.t[static_cast<std::size_t>(i % n_t)];
        cfg.threads = inner;
        const CodecConfig canon = cfg.canonicalized();

        const EncodeResult run = encode_sequence(frames, cfg);
        SweepPoint& p = points[static_cast<std::size_t>(i)];
        p.q1 = canon.q1;
        p.q2 = canon.q2;
        p.t = canon.t;
        p.bits = run.total_bits();
        p.bits_per_frame = static_cast<double>(p.bits) / static_cast<double>(frames.size());
        p.mean_psnr_db = run.mean_psnr_db();
    });
    mark_pareto(points);
    return points;
}

void mark_pareto(std::vector<SweepPoint>& points) {
    for (SweepPoint& a : points) {
        a.pareto = true;
        for (const SweepPoint& b : points) {
            const bool better = (b.bits < a.bits && b.mean_psnr_db >= a.mean_psnr_db) ||
                                (b.bits <= a.bits && b.mean_psnr_db > a.mean_psnr_db);
            if (better) {
                a.pareto = false;
                break;
            }
        }
    }
}

std::string sweep_csv(const std::vector<SweepPoint>& points) {
    std::string out = "q1,q2,t,bits,bits_per_frame,mean_psnr_db,pareto\n";
    char row[192];
    for (const SweepPoint& p : points) {
        std::snprintf(row, sizeof(row), "%.4f,%.4f,%.6f,%llu,%.2f,%.4f,%d\n", p.q1, p.q2, p.t,
                      static_cast<unsigned long long>(p.bits), p.bits_per_frame, p.mean_psnr_db, p.pareto ? 1 : 0);
        out += row;
    }
    return out;
}

}  // namespace tsvc
