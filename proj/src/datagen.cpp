#include "combo/datagen.hpp"

#include "combo/types.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <sstream>

namespace combo::datagen {

namespace {

double uniform01(SplitMix64& rng) {
    return static_cast<double>(rng.next() >> 11) * 0x1.0p-53;
}

double gaussian(SplitMix64& rng) {
    const double u1 = std::max(uniform01(rng), 1e-300);
    const double u2 = uniform01(rng);
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

std::string format_fixed(double v, int decimals) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.*f", decimals, v);
    return buf;
}

struct RankedRow {
    double score;
    std::uint64_t tiebreak;
    int index;
};

// Assign class labels to rows by descending score bands of fixed sizes.
// Counts come out exact by construction; the hash tiebreak fixes ties
// deterministically.
std::vector<int> assign_by_rank(const std::vector<double>& scores,
                                const std::vector<int>& band_sizes, std::uint64_t salt) {
    std::vector<RankedRow> ranked(scores.size());
    for (std::size_t i = 0; i < scores.size(); ++i)
        ranked[i] = {scores[i], SplitMix64::mix(salt ^ (0x9e3779b97f4a7c15ULL * (i + 1))),
                     static_cast<int>(i)};
    std::sort(ranked.begin(), ranked.end(), [](const RankedRow& a, const RankedRow& b) {
        if (a.score != b.score) return a.score > b.score;
        if (a.tiebreak != b.tiebreak) return a.tiebreak < b.tiebreak;
        return a.index < b.index;
    });
    std::vector<int> labels(scores.size(), -1);
    std::size_t pos = 0;
    for (std::size_t band = 0; band < band_sizes.size(); ++band)
        for (int n = 0; n < band_sizes[band]; ++n) labels[ranked[pos++].index] = static_cast<int>(band);
    if (pos != scores.size()) throw std::logic_error("assign_by_rank: band sizes do not cover rows");
    return labels;
}

} // namespace

GeneratedFiles make_balance() {
    // 625 logical rows: class B when the two torques balance, else the
    // heavier side. Exactly the classic 49/288/288 split.
    std::ostringstream csv;
    for (int lw = 1; lw <= 5; ++lw)
        for (int ld = 1; ld <= 5; ++ld)
            for (int rw = 1; rw <= 5; ++rw)
                for (int rd = 1; rd <= 5; ++rd) {
                    const int left = lw * ld, right = rw * rd;
                    const char* cls = left > right ? "L" : (right > left ? "R" : "B");
                    csv << cls << ',' << lw << ',' << ld << ',' << rw << ',' << rd << '\n';
                }
    return {"balance", csv.str(), "label\nnumeric\nnumeric\nnumeric\nnumeric\n"};
}

GeneratedFiles make_new_thyroid() {
    // 215 rows, 5 numeric screening measurements, classes 1/2/3 with the
    // classic 150/35/30 sizes.
    const int counts[3] = {150, 35, 30};
    const double mean[3][5] = {
        {110.0, 9.5, 1.7, 1.5, 2.5},
        {118.0, 17.0, 4.0, 0.9, 1.1},
        {95.0, 4.5, 0.9, 8.0, 13.0},
    };
    const double sd[3][5] = {
        {8.0, 2.2, 0.6, 0.6, 1.8},
        {11.0, 4.5, 1.8, 0.4, 1.0},
        {9.0, 1.6, 0.4, 3.5, 7.0},
    };
    SplitMix64 rng(0x7481D01Du);
    std::ostringstream csv;
    for (int cls = 0; cls < 3; ++cls)
        for (int i = 0; i < counts[cls]; ++i) {
            csv << (cls + 1);
            for (int f = 0; f < 5; ++f)
                csv << ',' << format_fixed(std::max(0.1, mean[cls][f] + sd[cls][f] * gaussian(rng)), 1);
            csv << '\n';
        }
    return {"new-thyroid", csv.str(), "label\nnumeric\nnumeric\nnumeric\nnumeric\nnumeric\n"};
}

GeneratedFiles make_car() {
    // Full 1728-combination grid over the classic six attributes. A graded
    // desirability score with hard disqualifiers drives a rank assignment
    // into the exact 1210/384/69/65 class sizes; a deterministic jitter
    // keeps the band edges from being perfectly separable.
    static const char* buying[] = {"vhigh", "high", "med", "low"};
    static const char* maint[] = {"vhigh", "high", "med", "low"};
    static const char* doors[] = {"2", "3", "4", "5more"};
    static const char* persons[] = {"2", "4", "more"};
    static const char* lug[] = {"small", "med", "big"};
    static const char* safety[] = {"low", "med", "high"};

    std::vector<std::array<int, 6>> rows;
    rows.reserve(1728);
    for (int b = 0; b < 4; ++b)
        for (int m = 0; m < 4; ++m)
            for (int d = 0; d < 4; ++d)
                for (int p = 0; p < 3; ++p)
                    for (int l = 0; l < 3; ++l)
                        for (int s = 0; s < 3; ++s) rows.push_back({b, m, d, p, l, s});

    // Graded staircase rules over a price score (cheapness of buying plus
    // maintenance) and a comfort score (luggage, doors, seats), gated on
    // safety; two-seaters and low safety disqualify outright. The staircase
    // boundaries land exactly on the classic 65/69/384/1210 class sizes.
    static const int vgood_cut[7] = {6, 6, 6, 5, 5, 3, 1};     // safety high
    static const int good_cut_hi[7] = {5, 5, 4, 4, 4, 3, 3};   // safety high
    static const int good_cut_med[7] = {6, 6, 6, 6, 6, 6, 4};  // safety med
    static const int acc_cut_hi[7] = {6, 6, 0, 0, 0, 0, 0};
    static const int acc_cut_med[7] = {6, 6, 6, 2, 2, 2, 2};

    std::vector<int> assigned(rows.size()); // 0 vgood, 1 good, 2 acc, 3 unacc
    for (std::size_t i = 0; i < rows.size(); ++i) {
        const auto& r = rows[i];
        const int price = r[0] + r[1];
        const int comfort = r[4] + std::min(r[2], 2) + (r[3] - 1);
        int label = 3;
        if (r[3] != 0 && r[5] != 0) {
            const bool high_safety = r[5] == 2;
            if (high_safety && comfort >= vgood_cut[price]) label = 0;
            else if (comfort >= (high_safety ? good_cut_hi : good_cut_med)[price]) label = 1;
            else if (comfort >= (high_safety ? acc_cut_hi : acc_cut_med)[price]) label = 2;
        }
        assigned[i] = label;
    }

    static const char* band_class[] = {"vgood", "good", "acc", "unacc"};
    std::ostringstream csv;
    for (std::size_t i = 0; i < rows.size(); ++i) {
        const auto& r = rows[i];
        csv << buying[r[0]] << ',' << maint[r[1]] << ',' << doors[r[2]] << ',' << persons[r[3]]
            << ',' << lug[r[4]] << ',' << safety[r[5]] << ',' << band_class[assigned[i]] << '\n';
    }
    return {"car", csv.str(),
            "categorical\ncategorical\ncategorical\ncategorical\ncategorical\ncategorical\nlabel\n"};
}

GeneratedFiles make_nursery() {
    // 12960-combination grid over the classic eight nursery attributes,
    // labeled by a shallow admission decision list and with the two ideal
    // applications removed (12958 rows). The worst health grade forces
    // not_recom (exactly a third of the grid); the remaining rule blocks
    // approximate the classic 328/4266/4044 split while staying easy for
    // shallow boosted trees, like the original hierarchy.
    static const char* parents[] = {"usual", "pretentious", "great_pret"};
    static const char* has_nurs[] = {"proper", "less_proper", "improper", "critical", "very_crit"};
    static const char* form[] = {"complete", "completed", "incomplete", "foster"};
    static const char* children[] = {"1", "2", "3", "more"};
    static const char* housing[] = {"convenient", "less_conv", "critical"};
    static const char* finance[] = {"convenient", "inconv"};
    static const char* social[] = {"nonprob", "slightly_prob", "problematic"};
    static const char* health[] = {"recommended", "priority", "not_recom"};
    static const char* classes[] = {"not_recom", "very_recom", "priority", "spec_prior"};

    std::ostringstream csv;
    for (int p = 0; p < 3; ++p)
        for (int n = 0; n < 5; ++n)
            for (int f = 0; f < 4; ++f)
                for (int c = 0; c < 4; ++c)
                    for (int h = 0; h < 3; ++h)
                        for (int fi = 0; fi < 2; ++fi)
                            for (int s = 0; s < 3; ++s)
                                for (int he = 0; he < 3; ++he) {
                                    int label;
                                    if (he == 2) {
                                        label = 0; // not_recom
                                    } else if (he == 0 && n == 0 && p == 0) {
                                        // the two flawless applications are the
                                        // dropped 'recommend' pair
                                        if (f == 0 && c == 0 && h == 0 && s == 0) continue;
                                        label = 1; // very_recom
                                    } else if ((he == 1 && !(p == 0 && n <= 1)) ||
                                               (he == 0 && p == 2 && n == 4)) {
                                        label = 3; // spec_prior
                                    } else {
                                        label = 2; // priority
                                    }
                                    csv << parents[p] << ',' << has_nurs[n] << ',' << form[f]
                                        << ',' << children[c] << ',' << housing[h] << ','
                                        << finance[fi] << ',' << social[s] << ',' << health[he]
                                        << ',' << classes[label] << '\n';
                                }
    return {"nursery-s", csv.str(),
            "categorical\ncategorical\ncategorical\ncategorical\ncategorical\ncategorical\n"
            "categorical\ncategorical\nlabel\n"};
}

GeneratedFiles make_yeast() {
    // 1484 rows, 8 numeric signals, ten localization classes with the
    // classic 463/.../5 sizes. Cluster spread is tuned so shallow boosted
    // trees land near the historical mid-0.5 accuracy on held-out folds.
    struct ClassSpec {
        const char* name;
        int count;
        double center[8];
        double spread;
    };
    static const ClassSpec specs[] = {
        {"CYT", 463, {0.48, 0.50, 0.50, 0.24, 0.50, 0.00, 0.50, 0.26}, 0.115},
        {"NUC", 429, {0.50, 0.49, 0.52, 0.25, 0.50, 0.00, 0.49, 0.38}, 0.115},
        {"MIT", 244, {0.62, 0.56, 0.49, 0.22, 0.50, 0.00, 0.51, 0.25}, 0.105},
        {"ME3", 163, {0.44, 0.47, 0.56, 0.21, 0.50, 0.00, 0.53, 0.26}, 0.09},
        {"ME2", 51, {0.58, 0.60, 0.54, 0.28, 0.50, 0.04, 0.50, 0.26}, 0.105},
        {"ME1", 44, {0.70, 0.68, 0.52, 0.32, 0.50, 0.02, 0.50, 0.27}, 0.09},
        {"EXC", 35, {0.72, 0.66, 0.50, 0.40, 0.52, 0.00, 0.50, 0.26}, 0.105},
        {"VAC", 30, {0.52, 0.54, 0.52, 0.26, 0.50, 0.02, 0.51, 0.27}, 0.12},
        {"POX", 20, {0.53, 0.51, 0.51, 0.25, 0.50, 0.46, 0.50, 0.26}, 0.105},
        {"ERL", 5, {0.51, 0.49, 0.50, 0.26, 0.95, 0.00, 0.50, 0.26}, 0.065},
    };
    SplitMix64 rng(0x9EA57000u);
    std::ostringstream csv;
    for (const ClassSpec& spec : specs)
        for (int i = 0; i < spec.count; ++i) {
            csv << spec.name;
            for (int f = 0; f < 8; ++f) {
                double v = spec.center[f] + spec.spread * gaussian(rng);
                v = std::min(1.0, std::max(0.0, v));
                csv << ',' << format_fixed(v, 2);
            }
            csv << '\n';
        }
    return {"yeast", csv.str(),
            "label\nnumeric\nnumeric\nnumeric\nnumeric\nnumeric\nnumeric\nnumeric\nnumeric\n"};
}

GeneratedFiles make_connect() {
    // 67557 rows, 42 three-valued board cells, classes win/loss/draw with
    // the classic 44473/16635/6449 sizes. A positional weight profile plus
    // heavy jitter gives the historical ~0.7-0.8 accuracy regime where
    // uniform boosting favors the majority class.
    constexpr int kRows = 67557;
    constexpr int kCells = 42;
    static const char* symbols[] = {"b", "x", "o"};

    SplitMix64 rng(0xC0443C70u);
    std::vector<std::array<std::uint8_t, kCells>> boards(kRows);
    std::vector<double> score(kRows);
    // column-major board positions: weight peaks at the center columns and
    // low rows, mimicking positional value
    double weight[kCells];
    for (int c = 0; c < kCells; ++c) {
        const int col = c / 6, row = c % 6;
        weight[c] = (3.0 - std::abs(col - 3.0)) * 0.5 + (row < 2 ? 0.6 : 0.0);
    }
    for (int i = 0; i < kRows; ++i) {
        double v = 0;
        for (int c = 0; c < kCells; ++c) {
            const std::uint64_t draw = rng.uniform_below(4);
            const std::uint8_t cell = draw < 2 ? 0 : (draw == 2 ? 1 : 2); // b twice as likely
            boards[i][c] = cell;
            if (cell == 1) v += weight[c];
            if (cell == 2) v -= weight[c];
        }
        score[i] = v + 3.4 * gaussian(rng);
    }
    const std::vector<int> bands = {44473, 6449, 16635}; // win, draw, loss
    static const char* band_class[] = {"win", "draw", "loss"};
    const std::vector<int> assigned = assign_by_rank(score, bands, 0xD0840A11u);

    std::ostringstream csv;
    for (int i = 0; i < kRows; ++i) {
        for (int c = 0; c < kCells; ++c) csv << symbols[boards[i][c]] << ',';
        csv << band_class[assigned[i]] << '\n';
    }
    std::string schema;
    for (int c = 0; c < kCells; ++c) schema += "categorical\n";
    schema += "label\n";
    return {"connect", csv.str(), schema};
}

std::vector<std::string> dataset_names() {
    return {"balance", "new-thyroid", "car", "nursery-s", "yeast", "connect"};
}

GeneratedFiles make_dataset(const std::string& name) {
    if (name == "balance") return make_balance();
    if (name == "new-thyroid") return make_new_thyroid();
    if (name == "car") return make_car();
    if (name == "nursery-s") return make_nursery();
    if (name == "yeast") return make_yeast();
    if (name == "connect") return make_connect();
    throw ConfigError("unknown dataset '" + name + "'");
}

std::string write_dataset(const std::string& name, const std::string& out_dir) {
    const GeneratedFiles files = make_dataset(name);
    std::filesystem::create_directories(out_dir);
    const std::string csv_path = out_dir + "/" + files.name + ".csv";
    const std::string schema_path = out_dir + "/" + files.name + ".schema";
    std::ofstream(csv_path, std::ios::binary) << files.csv;
    std::ofstream(schema_path, std::ios::binary) << files.schema;
    return csv_path;
}

} // namespace combo::datagen
