// scratch diagnostics for desk-scale tuning (not part of the build)
#include <iostream>

#include "privsim/config.hpp"
#include "privsim/federation.hpp"

using namespace privsim;

RunConfig base_cfg() {
    RunConfig cfg;
    cfg.seed = 707;
    cfg.dataset.synthetic = SynthSpec{6000, 6, 0.02, kDefaultYFloor};
    cfg.hidden = {4};
    cfg.participants = 20;
    cfg.partition.validation_size = 500;
    cfg.partition.test_size = 800;
    cfg.server.m = 10;
    cfg.server.k = 5;
    cfg.training.iterations = 15;
    cfg.training.batch_size = 32;
    cfg.training.learning_rate = 0.01;
    cfg.privacy.eps1 = 1.0;
    cfg.privacy.eps2 = 1.0;
    cfg.termination.rounds = 50;
    return cfg;
}

double plateau(const SimulationResult& r) {
    std::size_t n = r.records.size();
    std::size_t from = n - std::max<std::size_t>(1, n / 4);
    double s = 0;
    for (std::size_t i = from; i < n; ++i) s += r.records[i].metric;
    return s / double(n - from);
}

int main(int argc, char** argv) {
    std::string mode = argc > 1 ? argv[1] : "eps1";

    if (mode == "eps1") {
        // how the robustness trend depends on the selection budget
        for (double eps1 : {1.0, 2.0, 4.0, 8.0, 16.0, 64.0}) {
            RunConfig clean = base_cfg();
            clean.privacy.eps1 = eps1;
            clean.resolve_and_validate();
            RunConfig sec = base_cfg();
            sec.privacy.eps1 = eps1;
            sec.profiles.unreliable = 10;
            sec.profiles.p = 0.6;
            sec.resolve_and_validate();
            RunConfig nosel = sec;
            nosel.server.k = nosel.server.m;

            SimulationResult rc = run_simulation(clean);
            SimulationResult rs = run_simulation(sec);
            SimulationResult rn = run_simulation(nosel);

            // selection composition: unreliable ids are 10..19
            double clean_sel = 0, rounds = 0, gap_wins = 0, gaps = 0;
            double clean_score = 0, bad_score = 0, ns = 0;
            for (const auto& rec : rs.records) {
                rounds += 1;
                for (std::size_t id : rec.selected)
                    if (id < 10) clean_sel += 1;
                if (rec.round >= 5 && rec.score_gap) {
                    gaps += 1;
                    if (*rec.score_gap > 0) gap_wins += 1;
                }
                for (std::size_t i = 0; i < rec.uploaders.size(); ++i) {
                    if (rec.uploaders[i] < 10) clean_score += rec.scores[i];
                    else bad_score += rec.scores[i], ns += 0;
                }
            }
            std::printf(
                "eps1=%5.1f  clean=%.3f sec=%.3f (%+5.1f%%) nosel=%.3f (%+5.1f%%)  "
                "cleanSel/round=%.2f  gapwin=%.2f\n",
                eps1, plateau(rc), plateau(rs), 100 * (plateau(rs) / plateau(rc) - 1),
                plateau(rn), 100 * (plateau(rn) / plateau(rc) - 1), clean_sel / rounds,
                gap_wins / std::max(1.0, gaps));
        }
    } else if (mode == "scores") {
        RunConfig sec = base_cfg();
        sec.profiles.unreliable = 10;
        sec.profiles.p = 0.6;
        sec.resolve_and_validate();
        SimulationResult rs = run_simulation(sec);
        for (const auto& rec : rs.records) {
            if (rec.round % 10 != 0) continue;
            double cs = 0, bs = 0;
            int cn = 0, bn = 0;
            for (std::size_t i = 0; i < rec.uploaders.size(); ++i) {
                if (rec.uploaders[i] < 10) cs += rec.scores[i], ++cn;
                else bs += rec.scores[i], ++bn;
            }
            std::printf("round %2zu  mean clean score %.3f (%d)  mean unreliable %.3f (%d)\n",
                        rec.round, cn ? cs / cn : 0, cn, bn ? bs / bn : 0, bn);
        }
    } else if (mode == "tune8") {
        // stability sweep for the criterion-8 config
        for (std::size_t b : {2, 3}) {
            for (double lr : {0.003, 0.006}) {
                for (std::size_t batch : {32, 64}) {
                    for (std::size_t iters : {20, 100, 1000}) {
                        RunConfig cfg = base_cfg();
                        cfg.seed = 808;
                        cfg.dataset.synthetic = SynthSpec{4000, 6, 0.02, kDefaultYFloor};
                        cfg.hidden = {b};
                        cfg.partition.validation_size = 300;
                        cfg.partition.test_size = 600;
                        cfg.server.k = 10;
                        cfg.training.iterations = iters;
                        cfg.training.batch_size = batch;
                        cfg.training.learning_rate = lr;
                        cfg.termination.rounds =
                            iters == 1000 ? 40 : (iters == 100 ? 150 : 400);
                        cfg.resolve_and_validate();
                        SimulationResult r = run_simulation(cfg);
                        double best = 1e9;
                        for (const auto& rec : r.records) best = std::min(best, rec.metric);
                        std::printf(
                            "b=%zu lr=%.3f S=%3zu I=%4zu  plateau=%.3f best=%.3f\n",
                            b, lr, batch, iters, plateau(r), best);
                    }
                }
            }
        }
    } else if (mode == "rtt") {
        for (std::uint64_t seed : {808, 809, 810, 811}) {
            for (std::size_t iters : {20, 100, 1000}) {
                RunConfig cfg = base_cfg();
                cfg.seed = seed;
                cfg.dataset.synthetic = SynthSpec{4000, 6, 0.02, kDefaultYFloor};
                cfg.hidden = {3};
                cfg.partition.validation_size = 300;
                cfg.partition.test_size = 600;
                cfg.server.k = 10;
                cfg.training.iterations = iters;
                cfg.training.batch_size = 32;
                cfg.training.learning_rate = 0.006;
                cfg.termination.rounds.reset();
                cfg.termination.target_metric = 0.15;
                cfg.termination.max_rounds =
                    iters == 1000 ? 60 : (iters == 100 ? 200 : 500);
                cfg.resolve_and_validate();
                SimulationResult r = run_simulation(cfg);
                std::printf("seed=%llu I=%4zu rtt=%s (cap %zu)\n",
                            (unsigned long long)seed, iters,
                            r.rounds_to_target ? std::to_string(*r.rounds_to_target).c_str()
                                               : "never",
                            cfg.termination.max_rounds);
            }
        }
    } else if (mode == "ishape") {
        // plateau by I, to place the criterion-8 target
        for (std::size_t iters : {20, 100, 1000}) {
            RunConfig cfg = base_cfg();
            cfg.seed = 808;
            cfg.dataset.synthetic = SynthSpec{4000, 6, 0.02, kDefaultYFloor};
            cfg.partition.validation_size = 300;
            cfg.partition.test_size = 600;
            cfg.server.k = 10;
            cfg.training.iterations = iters;
            cfg.termination.rounds = iters == 1000 ? 40 : (iters == 100 ? 120 : 300);
            cfg.resolve_and_validate();
            SimulationResult r = run_simulation(cfg);
            // first round at which the metric dips below various targets
            for (double target : {0.30, 0.25, 0.22, 0.20}) {
                std::size_t hit = 0;
                for (const auto& rec : r.records)
                    if (rec.metric <= target) {
                        hit = rec.round + 1;
                        break;
                    }
                std::printf("I=%4zu target %.2f -> round %3zu   ", iters, target, hit);
            }
            std::printf("plateau %.3f\n", plateau(r));
        }
    }
    return 0;
}
