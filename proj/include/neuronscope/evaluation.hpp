#pragma once

// Metrics over attribution results. Statistics that are undefined (empty
// prediction precision, constant-column correlation, kappa with full chance
// agreement) are std::nullopt, serialized as JSON null; they never collapse
// to 0.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "neuronscope/activation_store.hpp"
#include "neuronscope/attribution.hpp"
#include "neuronscope/binary_matrix.hpp"
#include "neuronscope/error.hpp"

namespace neuronscope {

using Maybe = std::optional<double>;

inline nlohmann::json maybe_json(const Maybe& m) { return m ? nlohmann::json(*m) : nlohmann::json(nullptr); }

template <typename T>
std::size_t intersection_size(const std::set<T>& a, const std::set<T>& b) {
    std::size_t n = 0;
    for (const auto& x : a) n += b.count(x);
    return n;
}

struct PrecisionRecall {
    Maybe precision;
    Maybe recall;
};

inline PrecisionRecall precision_recall(const std::set<std::string>& pred, const std::set<std::string>& truth) {
    const double hit = static_cast<double>(intersection_size(pred, truth));
    PrecisionRecall out;
    if (!pred.empty()) out.precision = hit / static_cast<double>(pred.size());
    if (!truth.empty()) out.recall = hit / static_cast<double>(truth.size());
    return out;
}

// Slots past the end of a short ranking count as misses: the precision
// denominator is always K.
inline PrecisionRecall precision_recall_at_k(const std::vector<std::string>& ranked_pred,
                                             const std::set<std::string>& truth, std::size_t k) {
    if (k < 1) throw UsageError("precision_recall_at_k: K must be >= 1");
    std::set<std::string> top(ranked_pred.begin(), ranked_pred.begin() + static_cast<std::ptrdiff_t>(std::min(k, ranked_pred.size())));
    const double hit = static_cast<double>(intersection_size(top, truth));
    PrecisionRecall out;
    out.precision = hit / static_cast<double>(k);
    if (!truth.empty()) out.recall = hit / static_cast<double>(truth.size());
    return out;
}

// |a ∩ b| / |a ∪ b|, with J(∅, ∅) = 1.
template <typename T>
double jaccard(const std::set<T>& a, const std::set<T>& b) {
    if (a.empty() && b.empty()) return 1.0;
    const std::size_t inter = intersection_size(a, b);
    return static_cast<double>(inter) / static_cast<double>(a.size() + b.size() - inter);
}

// Mean and population standard deviation over the defined values.
struct Summary {
    Maybe mean;
    Maybe std;
    std::size_t count = 0;
};

inline Summary summarize(std::span<const Maybe> xs) {
    double sum = 0;
    std::size_t n = 0;
    for (const auto& x : xs)
        if (x) {
            sum += *x;
            ++n;
        }
    Summary s;
    s.count = n;
    if (n == 0) return s;
    const double mean = sum / static_cast<double>(n);
    double ss = 0;
    for (const auto& x : xs)
        if (x) ss += (*x - mean) * (*x - mean);
    s.mean = mean;
    s.std = std::sqrt(ss / static_cast<double>(n));
    return s;
}

inline Summary summarize(std::span<const double> xs) {
    std::vector<Maybe> m(xs.begin(), xs.end());
    return summarize(std::span<const Maybe>(m));
}

inline nlohmann::json to_json(const Summary& s) {
    return {{"mean", maybe_json(s.mean)}, {"std", maybe_json(s.std)}, {"count", s.count}};
}

// ---------------------------------------------------------------------------
// Ground truth: {"neurons": [{"layer": l, "index": i, "labels": [...]}, ...]}
// Label order matters when truncating to the top entries.

struct GroundTruth {
    std::map<NeuronId, std::vector<std::string>> labels;

    GroundTruth truncated(std::size_t top) const {
        GroundTruth out;
        for (const auto& [n, ls] : labels)
            out.labels[n] = std::vector<std::string>(ls.begin(), ls.begin() + static_cast<std::ptrdiff_t>(std::min(top, ls.size())));
        return out;
    }

    std::set<std::string> set_of(NeuronId n) const {
        auto it = labels.find(n);
        if (it == labels.end()) return {};
        return {it->second.begin(), it->second.end()};
    }
};

inline nlohmann::json truth_to_json(const GroundTruth& gt) {
    nlohmann::json arr = nlohmann::json::array();
    for (const auto& [n, ls] : gt.labels) arr.push_back({{"layer", n.layer}, {"index", n.index}, {"labels", ls}});
    return {{"neurons", arr}};
}

inline GroundTruth truth_from_json(const nlohmann::json& j) {
    GroundTruth gt;
    try {
        for (const auto& e : j.at("neurons")) {
            NeuronId n{e.at("layer").get<std::uint32_t>(), e.at("index").get<std::uint32_t>()};
            if (!gt.labels.emplace(n, e.at("labels").get<std::vector<std::string>>()).second)
                throw DataError("ground truth: duplicate neuron " + n.str());
        }
    } catch (const nlohmann::json::exception& e) {
        throw DataError(std::string("ground truth: ") + e.what());
    }
    return gt;
}

// ---------------------------------------------------------------------------
// Curves over the composition threshold

inline std::vector<double> threshold_grid(double step = 0.05) {
    if (!(step > 0.0 && step <= 1.0)) throw UsageError("threshold grid step must be in (0, 1]");
    const auto n = static_cast<std::size_t>(std::llround(1.0 / step));
    std::vector<double> out;
    for (std::size_t i = 0; i <= n; ++i) out.push_back(std::min(1.0, static_cast<double>(i) / static_cast<double>(n)));
    return out;
}

struct CurvePoint {
    double t = 0;
    Summary value;
};

namespace detail {
inline std::map<NeuronId, const NeuronDescriptors*> index_by_neuron(const std::vector<NeuronDescriptors>& v,
                                                                    const char* what) {
    std::map<NeuronId, const NeuronDescriptors*> out;
    for (const auto& nd : v)
        if (!out.emplace(nd.neuron, &nd).second)
            throw DataError(std::string(what) + ": duplicate neuron " + nd.neuron.str());
    return out;
}

inline std::set<std::string> assigned_set_at(const NeuronDescriptors& nd, double t) {
    auto v = assigned_at(nd.ranked, t);
    return {v.begin(), v.end()};
}
} // namespace detail

struct ConsistencyCurve {
    std::vector<NeuronId> neurons;
    std::vector<CurvePoint> points;
    std::vector<std::vector<double>> per_neuron;  // [t][neuron]
};

// Jaccard of the calibration and validation descriptor sets of each neuron,
// re-thresholded from the stored frequencies at every t.
inline ConsistencyCurve consistency_curve(const std::vector<NeuronDescriptors>& cal,
                                          const std::vector<NeuronDescriptors>& val, const std::vector<double>& t_grid) {
    const auto ci = detail::index_by_neuron(cal, "calibration attribution");
    const auto vi = detail::index_by_neuron(val, "validation attribution");
    if (ci.size() != vi.size()) throw DataError("consistency: calibration and validation cover different neurons");
    ConsistencyCurve out;
    for (const auto& [n, _] : ci) {
        if (!vi.contains(n)) throw DataError("consistency: neuron " + n.str() + " missing from validation");
        out.neurons.push_back(n);
    }
    for (double t : t_grid) {
        if (!(t >= 0.0 && t <= 1.0)) throw UsageError("threshold must be in [0, 1]");
        std::vector<double> js;
        js.reserve(out.neurons.size());
        for (const auto& n : out.neurons)
            js.push_back(jaccard(detail::assigned_set_at(*ci.at(n), t), detail::assigned_set_at(*vi.at(n), t)));
        out.points.push_back({t, summarize(std::span<const double>(js))});
        out.per_neuron.push_back(std::move(js));
    }
    return out;
}

inline ConsistencyCurve neuron_consistency_curve(const ActivationStore& store_cal, const ActivationStore& store_val,
                                                 const BinaryMatrix& matrix_cal, const BinaryMatrix& matrix_val,
                                                 const std::vector<NeuronId>& neurons, double k_percent,
                                                 const std::vector<double>& t_grid, std::size_t jobs = 1) {
    const AttributionParams p{k_percent, 0.0, jobs};
    return consistency_curve(attribute(store_cal, matrix_cal, neurons, p), attribute(store_val, matrix_val, neurons, p),
                             t_grid);
}

// Per label, Jaccard of the neuron sets; labels absent from a map count as ∅.
inline std::map<std::string, double> descriptor_consistency(const InverseMap& cal, const InverseMap& val,
                                                            const std::vector<std::string>& labels) {
    static const std::set<NeuronId> none;
    std::map<std::string, double> out;
    for (const auto& label : labels) {
        const auto a = cal.find(label);
        const auto b = val.find(label);
        out[label] = jaccard(a == cal.end() ? none : a->second, b == val.end() ? none : b->second);
    }
    return out;
}

inline InverseMap invert_at(const std::vector<NeuronDescriptors>& all, double t) {
    InverseMap out;
    for (const auto& nd : all)
        for (const auto& label : assigned_at(nd.ranked, t)) out[label].insert(nd.neuron);
    return out;
}

// ---------------------------------------------------------------------------
// Precision/recall against ground truth

struct PrCurvePoint {
    double t = 0;
    Summary precision;
    Summary recall;
    std::vector<Maybe> per_neuron_precision;
    std::vector<Maybe> per_neuron_recall;
};

inline std::vector<PrCurvePoint> pr_curve(const std::vector<NeuronDescriptors>& pred, const GroundTruth& truth,
                                          const std::vector<double>& t_grid) {
    std::vector<PrCurvePoint> out;
    for (double t : t_grid) {
        PrCurvePoint pt;
        pt.t = t;
        for (const auto& nd : pred) {
            const auto pr = precision_recall(detail::assigned_set_at(nd, t), truth.set_of(nd.neuron));
            pt.per_neuron_precision.push_back(pr.precision);
            pt.per_neuron_recall.push_back(pr.recall);
        }
        pt.precision = summarize(std::span<const Maybe>(pt.per_neuron_precision));
        pt.recall = summarize(std::span<const Maybe>(pt.per_neuron_recall));
        out.push_back(std::move(pt));
    }
    return out;
}

struct PrAtK {
    std::size_t k = 1;
    Summary precision;
    Summary recall;
};

// Neurons without ground-truth labels are skipped.
inline std::vector<PrAtK> pr_at_k(const std::vector<NeuronDescriptors>& pred, const GroundTruth& truth,
                                  const std::vector<std::size_t>& ks) {
    std::vector<PrAtK> out;
    for (auto k : ks) {
        std::vector<Maybe> ps, rs;
        for (const auto& nd : pred) {
            const auto gt = truth.set_of(nd.neuron);
            if (gt.empty()) continue;
            const auto pr = precision_recall_at_k(top_k_descriptors(nd.ranked, k), gt, k);
            ps.push_back(pr.precision);
            rs.push_back(pr.recall);
        }
        out.push_back({k, summarize(std::span<const Maybe>(ps)), summarize(std::span<const Maybe>(rs))});
    }
    return out;
}

// ---------------------------------------------------------------------------
// Phi coefficient between descriptor columns, from 2x2 contingency counts.

struct CorrelationMatrix {
    std::vector<std::string> labels;
    std::vector<std::vector<Maybe>> values;
};

inline Maybe phi_from_counts(std::uint64_t n11, std::uint64_t n10, std::uint64_t n01, std::uint64_t n00) {
    const std::uint64_t r1 = n11 + n10, r0 = n01 + n00, c1 = n11 + n01, c0 = n10 + n00;
    if (r1 == 0 || r0 == 0 || c1 == 0 || c0 == 0) return std::nullopt;
    const long double num = static_cast<long double>(n11) * n00 - static_cast<long double>(n10) * n01;
    const long double den = std::sqrt(static_cast<long double>(r1) * r0 * c1 * c0);
    return static_cast<double>(std::clamp(num / den, -1.0L, 1.0L));
}

inline CorrelationMatrix phi_correlation(const BinaryMatrix& m) {
    if (m.rows() < 2) throw DataError("phi_correlation: need at least 2 rows");
    const std::size_t c = m.cols();
    std::vector<std::uint64_t> ones(c, 0);
    std::vector<std::vector<std::uint64_t>> both(c, std::vector<std::uint64_t>(c, 0));
    for (std::size_t r = 0; r < m.rows(); ++r) {
        for (std::size_t a = 0; a < c; ++a) {
            if (!m.get(r, a)) continue;
            ++ones[a];
            for (std::size_t b = a; b < c; ++b) both[a][b] += m.get(r, b);
        }
    }
    const std::uint64_t n = m.rows();
    CorrelationMatrix out{m.descriptors(), std::vector<std::vector<Maybe>>(c, std::vector<Maybe>(c))};
    for (std::size_t a = 0; a < c; ++a) {
        for (std::size_t b = a; b < c; ++b) {
            const std::uint64_t n11 = both[a][b];
            const std::uint64_t n10 = ones[a] - n11, n01 = ones[b] - n11;
            const std::uint64_t n00 = n - n11 - n10 - n01;
            Maybe v = a == b ? (ones[a] == 0 || ones[a] == n ? Maybe{} : Maybe{1.0}) : phi_from_counts(n11, n10, n01, n00);
            out.values[a][b] = v;
            out.values[b][a] = v;
        }
    }
    return out;
}

inline nlohmann::json to_json(const CorrelationMatrix& cm) {
    nlohmann::json rows = nlohmann::json::array();
    for (const auto& row : cm.values) {
        nlohmann::json r = nlohmann::json::array();
        for (const auto& v : row) r.push_back(maybe_json(v));
        rows.push_back(std::move(r));
    }
    return {{"labels", cm.labels}, {"matrix", rows}};
}

// Heatmap-ready CSV: header ",<labels>", then "<label>,<values>"; undefined
// entries are empty fields.
inline std::string correlation_to_csv(const CorrelationMatrix& cm) {
    auto field = [](const std::string& s) { return neuronscope::detail::csv_field(s); };
    std::string out;
    for (const auto& l : cm.labels) out += "," + field(l);
    out += "\n";
    for (std::size_t a = 0; a < cm.labels.size(); ++a) {
        out += field(cm.labels[a]);
        for (const auto& v : cm.values[a]) {
            out += ",";
            if (v) out += nlohmann::json(*v).dump();
        }
        out += "\n";
    }
    return out;
}

// ---------------------------------------------------------------------------
// Cohen's kappa for two binary annotations, in exact integer arithmetic:
// kappa = (n * agree - S) / (n^2 - S) with S = A1*B1 + A0*B0.

inline Maybe cohens_kappa(std::span<const std::uint8_t> a, std::span<const std::uint8_t> b) {
    if (a.size() != b.size()) throw DataError("cohens_kappa: annotation lengths differ");
    if (a.empty()) throw DataError("cohens_kappa: empty annotations");
    std::int64_t agree = 0, a1 = 0, b1 = 0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        if (a[i] > 1 || b[i] > 1) throw DataError("cohens_kappa: labels must be 0 or 1");
        agree += a[i] == b[i];
        a1 += a[i];
        b1 += b[i];
    }
    const auto n = static_cast<std::int64_t>(a.size());
    const __int128 chance = static_cast<__int128>(a1) * b1 + static_cast<__int128>(n - a1) * (n - b1);
    const __int128 num = static_cast<__int128>(n) * agree - chance;
    const __int128 den = static_cast<__int128>(n) * n - chance;
    if (den == 0) return agree == n ? Maybe{1.0} : Maybe{};
    return static_cast<double>(static_cast<long double>(num) / static_cast<long double>(den));
}

// Cells of two matrices over the same sentence ids and descriptors, flattened
// in a's row-major order. b may list rows and columns in another order.
inline std::pair<std::vector<std::uint8_t>, std::vector<std::uint8_t>> paired_cells(const BinaryMatrix& a,
                                                                                    const BinaryMatrix& b) {
    if (a.rows() != b.rows() || a.cols() != b.cols())
        throw DataError("annotation matrices differ in shape");
    std::vector<std::size_t> col_map;
    for (const auto& label : a.descriptors()) {
        const auto c = b.column_of(label);
        if (!c) throw DataError("annotation matrices differ: descriptor '" + label + "' missing from the second");
        col_map.push_back(*c);
    }
    std::vector<std::uint8_t> x, y;
    x.reserve(a.rows() * a.cols());
    y.reserve(a.rows() * a.cols());
    for (std::size_t r = 0; r < a.rows(); ++r) {
        const auto rb = b.row_of(a.sentence_ids()[r]);
        if (!rb) throw DataError("annotation matrices differ: sentence '" + a.sentence_ids()[r] + "' missing from the second");
        for (std::size_t c = 0; c < a.cols(); ++c) {
            x.push_back(a.get(r, c));
            y.push_back(b.get(*rb, col_map[c]));
        }
    }
    return {std::move(x), std::move(y)};
}

// ---------------------------------------------------------------------------
// LLM annotations scored against a reference annotation of the same cells,
// aggregated both micro (pooled counts) and macro (mean over descriptors).

struct AnnotationAgreement {
    PrecisionRecall micro;
    Summary macro_precision;
    Summary macro_recall;
    std::map<std::string, PrecisionRecall> per_descriptor;
};

inline AnnotationAgreement annotation_agreement(const BinaryMatrix& pred, const BinaryMatrix& reference) {
    AnnotationAgreement out;
    std::uint64_t tp = 0, fp = 0, fn = 0;
    std::vector<Maybe> ps, rs;
    for (std::size_t c = 0; c < reference.cols(); ++c) {
        const auto& label = reference.descriptors()[c];
        const auto pc = pred.column_of(label);
        if (!pc) throw DataError("annotation_agreement: descriptor '" + label + "' missing from predictions");
        std::uint64_t ctp = 0, cfp = 0, cfn = 0;
        for (std::size_t r = 0; r < reference.rows(); ++r) {
            const auto pr = pred.require_row(reference.sentence_ids()[r]);
            const bool p = pred.get(pr, *pc), t = reference.get(r, c);
            ctp += p && t;
            cfp += p && !t;
            cfn += !p && t;
        }
        PrecisionRecall d;
        if (ctp + cfp) d.precision = static_cast<double>(ctp) / static_cast<double>(ctp + cfp);
        if (ctp + cfn) d.recall = static_cast<double>(ctp) / static_cast<double>(ctp + cfn);
        out.per_descriptor[label] = d;
        ps.push_back(d.precision);
        rs.push_back(d.recall);
        tp += ctp;
        fp += cfp;
        fn += cfn;
    }
    if (tp + fp) out.micro.precision = static_cast<double>(tp) / static_cast<double>(tp + fp);
    if (tp + fn) out.micro.recall = static_cast<double>(tp) / static_cast<double>(tp + fn);
    out.macro_precision = summarize(std::span<const Maybe>(ps));
    out.macro_recall = summarize(std::span<const Maybe>(rs));
    return out;
}

// ---------------------------------------------------------------------------
// Report assembly

struct EvalInputs {
    const std::vector<NeuronDescriptors>* cal = nullptr;
    const std::vector<NeuronDescriptors>* val = nullptr;
    const GroundTruth* truth = nullptr;
    const BinaryMatrix* matrix = nullptr;  // for the correlation section
    const BinaryMatrix* annotator_a = nullptr;
    const BinaryMatrix* annotator_b = nullptr;
    const BinaryMatrix* reference = nullptr;  // scored against `matrix`
    std::vector<double> t_grid = threshold_grid();
    std::vector<std::size_t> ks = {1, 2, 3, 4, 5};
    std::size_t truth_top = 3;
    std::vector<std::string> descriptor_labels;  // for descriptor-level Jaccard; empty = all seen
};

inline nlohmann::json evaluation_report(const EvalInputs& in) {
    nlohmann::json report = nlohmann::json::object();

    if (in.cal && in.truth) {
        const auto truth = in.truth->truncated(in.truth_top);
        nlohmann::json curves = nlohmann::json::array();
        for (const auto& pt : pr_curve(*in.cal, truth, in.t_grid)) {
            nlohmann::json pn = nlohmann::json::array(), rn = nlohmann::json::array();
            for (const auto& v : pt.per_neuron_precision) pn.push_back(maybe_json(v));
            for (const auto& v : pt.per_neuron_recall) rn.push_back(maybe_json(v));
            curves.push_back({{"t", pt.t},
                              {"precision", to_json(pt.precision)},
                              {"recall", to_json(pt.recall)},
                              {"per_neuron_precision", pn},
                              {"per_neuron_recall", rn}});
        }
        nlohmann::json neurons = nlohmann::json::array();
        for (const auto& nd : *in.cal) neurons.push_back({nd.neuron.layer, nd.neuron.index});
        report["pr_curves"] = {{"neurons", neurons}, {"points", curves}};

        nlohmann::json atk = nlohmann::json::array();
        for (const auto& p : pr_at_k(*in.cal, truth, in.ks))
            atk.push_back({{"k", p.k}, {"precision", to_json(p.precision)}, {"recall", to_json(p.recall)}});
        report["pr_at_k"] = atk;
    } else {
        report["pr_curves"] = nullptr;
        report["pr_at_k"] = nullptr;
    }

    if (in.cal && in.val) {
        const auto curve = consistency_curve(*in.cal, *in.val, in.t_grid);
        nlohmann::json pts = nlohmann::json::array();
        for (const auto& p : curve.points) pts.push_back({{"t", p.t}, {"jaccard", to_json(p.value)}});
        report["neuron_jaccard"] = pts;

        std::vector<std::string> labels = in.descriptor_labels;
        if (labels.empty()) {
            std::set<std::string> all;
            for (const auto* side : {in.cal, in.val})
                for (const auto& nd : *side)
                    for (const auto& [label, f] : nd.ranked) all.insert(label);
            labels.assign(all.begin(), all.end());
        }
        nlohmann::json dj = nlohmann::json::object();
        for (const auto& label : labels) dj[label] = nlohmann::json::array();
        for (double t : in.t_grid) {
            const auto per = descriptor_consistency(invert_at(*in.cal, t), invert_at(*in.val, t), labels);
            for (const auto& [label, j] : per) dj[label].push_back({{"t", t}, {"jaccard", j}});
        }
        report["descriptor_jaccard"] = dj;
    } else {
        report["neuron_jaccard"] = nullptr;
        report["descriptor_jaccard"] = nullptr;
    }

    report["correlation"] = in.matrix ? to_json(phi_correlation(*in.matrix)) : nlohmann::json(nullptr);

    if (in.annotator_a && in.annotator_b) {
        const auto [a, b] = paired_cells(*in.annotator_a, *in.annotator_b);
        report["kappa"] = maybe_json(cohens_kappa(a, b));
    } else {
        report["kappa"] = nullptr;
    }

    if (in.matrix && in.reference) {
        const auto agr = annotation_agreement(*in.matrix, *in.reference);
        nlohmann::json per = nlohmann::json::object();
        for (const auto& [label, pr] : agr.per_descriptor)
            per[label] = {{"precision", maybe_json(pr.precision)}, {"recall", maybe_json(pr.recall)}};
        report["annotation_pr"] = {
            {"micro", {{"precision", maybe_json(agr.micro.precision)}, {"recall", maybe_json(agr.micro.recall)}}},
            {"macro", {{"precision", to_json(agr.macro_precision)}, {"recall", to_json(agr.macro_recall)}}},
            {"per_descriptor", per}};
    }
    return report;
}

} // namespace neuronscope
