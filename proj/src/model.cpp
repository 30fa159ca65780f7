// SPDX-License-Identifier: Apache-2.0
#include "dpdlab/model.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace dpdlab {

namespace {

// Largest index back (or forward, for leading shifts) any term reaches.
std::ptrdiff_t max_lookback(const ModelStructure& s) {
    auto lb = static_cast<std::ptrdiff_t>(s.memory_depth);
    if (s.kind == ModelKind::GeneralizedMemoryPolynomial)
        for (const auto& t : s.cross_terms)
            lb = std::max(lb, static_cast<std::ptrdiff_t>(t.memory) +
                                  std::max<std::ptrdiff_t>(t.shift, 0));
    return lb;
}

// Regressor rows offset..offset+nrows-1 evaluated on ext; indices outside
// ext read as zero. The diagonal part is filled column-wise with iterated
// envelope powers instead of per-entry pow.
CMatrix build_core(const ModelStructure& s, const std::vector<cdouble>& ext, std::size_t offset,
                   std::size_t nrows) {
    CMatrix h(nrows, s.coeff_count());
    const auto n_ext = static_cast<std::ptrdiff_t>(ext.size());
    std::vector<double> amp(ext.size());
    for (std::size_t i = 0; i < ext.size(); ++i) amp[i] = std::abs(ext[i]);
    std::vector<cdouble> base(ext);

    const std::size_t mdep = s.memory_depth;
    for (std::size_t p = 1; p <= s.nonlinearity_order; ++p) {
        if (p > 1)
            for (std::size_t i = 0; i < base.size(); ++i) base[i] *= amp[i];
        for (std::size_t m = 0; m <= mdep; ++m) {
            const std::size_t col = (p - 1) * (mdep + 1) + m;
            for (std::size_t n = 0; n < nrows; ++n) {
                const auto i = static_cast<std::ptrdiff_t>(offset + n) -
                               static_cast<std::ptrdiff_t>(m);
                h(n, col) = (i >= 0 && i < n_ext) ? base[static_cast<std::size_t>(i)]
                                                  : cdouble{0.0, 0.0};
            }
        }
    }

    if (s.kind == ModelKind::GeneralizedMemoryPolynomial) {
        std::size_t col = s.nonlinearity_order * (mdep + 1);
        for (const auto& t : s.cross_terms) {
            for (std::size_t n = 0; n < nrows; ++n) {
                const auto i = static_cast<std::ptrdiff_t>(offset + n) -
                               static_cast<std::ptrdiff_t>(t.memory);
                const auto j = i - t.shift;
                const cdouble v =
                    (i >= 0 && i < n_ext) ? ext[static_cast<std::size_t>(i)] : cdouble{0.0, 0.0};
                const double e = (j >= 0 && j < n_ext) ? amp[static_cast<std::size_t>(j)] : 0.0;
                h(n, col) = v * std::pow(e, static_cast<double>(t.order - 1));
            }
            ++col;
        }
    }
    return h;
}

} // namespace

std::size_t ModelStructure::coeff_count() const {
    std::size_t n = nonlinearity_order * (memory_depth + 1);
    if (kind == ModelKind::GeneralizedMemoryPolynomial) n += cross_terms.size();
    return n;
}

std::vector<Diagnostic> ModelStructure::problems() const {
    std::vector<Diagnostic> out;
    if (nonlinearity_order == 0)
        out.push_back({"model.nonlinearity_order", "must be at least 1"});
    if (kind == ModelKind::MemoryPolynomial && !cross_terms.empty())
        out.push_back({"model.cross_terms", "memory polynomial takes no cross terms"});
    for (const auto& t : cross_terms) {
        if (t.order < 2)
            out.push_back({"model.cross_terms", "cross term order must be at least 2"});
        if (t.shift == 0)
            out.push_back({"model.cross_terms", "cross term shift of 0 duplicates a diagonal term"});
    }
    return out;
}

ParameterSet unit_linear_params(const ModelStructure& s) {
    ParameterSet p;
    p.structure = s;
    p.theta.assign(s.coeff_count(), cdouble{0.0, 0.0});
    p.theta[0] = {1.0, 0.0};
    return p;
}

std::size_t regressor_lookback(const ModelStructure& s) {
    return static_cast<std::size_t>(max_lookback(s));
}

std::size_t regressor_lookahead(const ModelStructure& s) {
    std::ptrdiff_t la = 0;
    if (s.kind == ModelKind::GeneralizedMemoryPolynomial)
        for (const auto& t : s.cross_terms)
            la = std::max(la, -(static_cast<std::ptrdiff_t>(t.memory) + t.shift));
    return static_cast<std::size_t>(std::max<std::ptrdiff_t>(la, 0));
}

CMatrix build_regressor(const ModelStructure& s, const std::vector<cdouble>& x) {
    return build_core(s, x, 0, x.size());
}

CMatrix build_regressor_with_history(const ModelStructure& s,
                                     const std::vector<cdouble>& history,
                                     const std::vector<cdouble>& x) {
    return build_regressor_with_context(s, history, x, {});
}

CMatrix build_regressor_with_context(const ModelStructure& s,
                                     const std::vector<cdouble>& history,
                                     const std::vector<cdouble>& x,
                                     const std::vector<cdouble>& future) {
    const std::size_t keep = std::min(regressor_lookback(s), history.size());
    const std::size_t ahead = std::min(regressor_lookahead(s), future.size());
    if (keep == 0 && ahead == 0) return build_core(s, x, 0, x.size());
    std::vector<cdouble> ext;
    ext.reserve(keep + x.size() + ahead);
    ext.insert(ext.end(), history.end() - static_cast<std::ptrdiff_t>(keep), history.end());
    ext.insert(ext.end(), x.begin(), x.end());
    ext.insert(ext.end(), future.begin(), future.begin() + static_cast<std::ptrdiff_t>(ahead));
    return build_core(s, ext, keep, x.size());
}

std::vector<cdouble> model_output(const ParameterSet& p, const std::vector<cdouble>& x) {
    if (p.theta.size() != p.structure.coeff_count())
        throw std::invalid_argument("model_output: theta size mismatch");
    return matvec(build_regressor(p.structure, x), p.theta);
}

std::vector<cdouble> proactive_output(const ParameterSet& p, const std::vector<cdouble>& x,
                                      const std::vector<double>& s) {
    if (p.theta.size() != p.structure.coeff_count())
        throw std::invalid_argument("proactive_output: theta size mismatch");
    const CMatrix h = build_regressor(p.structure, x);
    std::vector<cdouble> y = matvec(h, p.theta);
    if (p.theta_dyn) {
        if (s.size() != x.size())
            throw std::invalid_argument("proactive_output: state length mismatch");
        const std::vector<cdouble> ydyn = matvec(h, *p.theta_dyn);
        for (std::size_t n = 0; n < y.size(); ++n) y[n] += s[n] * ydyn[n];
    }
    return y;
}

std::vector<double> compute_state(const ComplexSignal& x, const StateConfig& cfg) {
    ComplexSignal p;
    p.sample_rate_hz = x.sample_rate_hz;
    p.samples.resize(x.samples.size());
    for (std::size_t n = 0; n < x.samples.size(); ++n)
        p.samples[n] = {std::norm(x.samples[n]), 0.0};
    const ComplexSignal f = lowpass_filter(p, cfg.cutoff_hz);
    std::vector<double> s(f.samples.size());
    for (std::size_t n = 0; n < s.size(); ++n) s[n] = f.samples[n].real();
    return s;
}

CMatrix build_proactive_regressor(const ModelStructure& s, const std::vector<cdouble>& x,
                                  const std::vector<double>& state) {
    if (state.size() != x.size())
        throw std::invalid_argument("build_proactive_regressor: state length mismatch");
    const CMatrix h = build_regressor(s, x);
    CMatrix out(h.rows, 2 * h.cols);
    for (std::size_t r = 0; r < h.rows; ++r) {
        const cdouble* src = h.data.data() + r * h.cols;
        cdouble* dst = out.data.data() + r * out.cols;
        for (std::size_t c = 0; c < h.cols; ++c) {
            dst[c] = src[c];
            dst[h.cols + c] = state[r] * src[c];
        }
    }
    return out;
}

void save_params_csv(const ParameterSet& p, const std::string& path) {
    std::FILE* f = std::fopen(path.c_str(), "w");
    if (!f) throw std::runtime_error("save_params_csv: cannot open " + path);
    std::fprintf(f, "# kind,%s\n",
                 p.structure.kind == ModelKind::MemoryPolynomial ? "mp" : "gmp");
    std::fprintf(f, "# nonlinearity_order,%zu\n", p.structure.nonlinearity_order);
    std::fprintf(f, "# memory_depth,%zu\n", p.structure.memory_depth);
    if (!p.structure.cross_terms.empty()) {
        std::fprintf(f, "# cross");
        for (const auto& t : p.structure.cross_terms)
            std::fprintf(f, ",%zu:%zu:%td", t.order, t.memory, t.shift);
        std::fprintf(f, "\n");
    }
    std::fprintf(f, "index,re,im,block\n");
    for (std::size_t i = 0; i < p.theta.size(); ++i)
        std::fprintf(f, "%zu,%.17g,%.17g,static\n", i, p.theta[i].real(), p.theta[i].imag());
    if (p.theta_dyn)
        for (std::size_t i = 0; i < p.theta_dyn->size(); ++i)
            std::fprintf(f, "%zu,%.17g,%.17g,dynamic\n", i, (*p.theta_dyn)[i].real(),
                         (*p.theta_dyn)[i].imag());
    std::fclose(f);
}

ParameterSet load_params_csv(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw std::runtime_error("load_params_csv: cannot open " + path);
    ParameterSet p;
    std::vector<cdouble> dyn;
    std::string line;
    while (std::getline(is, line)) {
        if (line.empty()) continue;
        if (line[0] == '#') {
            std::istringstream meta(line.substr(1));
            std::string tok;
            std::getline(meta, tok, ',');
            const auto key = tok.substr(tok.find_first_not_of(' '));
            if (key == "kind") {
                std::getline(meta, tok, ',');
                p.structure.kind = (tok == "gmp") ? ModelKind::GeneralizedMemoryPolynomial
                                                  : ModelKind::MemoryPolynomial;
            } else if (key == "nonlinearity_order") {
                std::getline(meta, tok, ',');
                p.structure.nonlinearity_order = std::stoul(tok);
            } else if (key == "memory_depth") {
                std::getline(meta, tok, ',');
                p.structure.memory_depth = std::stoul(tok);
            } else if (key == "cross") {
                while (std::getline(meta, tok, ',')) {
                    GmpTerm t;
                    if (std::sscanf(tok.c_str(), "%zu:%zu:%td", &t.order, &t.memory, &t.shift) != 3)
                        throw std::runtime_error("load_params_csv: bad cross term in " + path);
                    p.structure.cross_terms.push_back(t);
                }
            }
            continue;
        }
        if (line.rfind("index,", 0) == 0) continue;
        std::istringstream row(line);
        std::string idx, re, im, block;
        if (!std::getline(row, idx, ',') || !std::getline(row, re, ',') ||
            !std::getline(row, im, ',') || !std::getline(row, block))
            throw std::runtime_error("load_params_csv: malformed row in " + path);
        const cdouble v{std::stod(re), std::stod(im)};
        if (block == "dynamic")
            dyn.push_back(v);
        else
            p.theta.push_back(v);
    }
    if (!dyn.empty()) p.theta_dyn = std::move(dyn);
    if (p.theta.size() != p.structure.coeff_count())
        throw std::runtime_error("load_params_csv: coefficient count mismatch in " + path);
    return p;
}

} // namespace dpdlab
