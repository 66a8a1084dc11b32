#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <istream>
#include <map>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "customs/declaration.hpp"

namespace customs {

// Column names for each consumed field. Defaults are the canonical header.
// Label columns: clearing `illicit` opts into unlabeled parsing (every row
// gets {illicit=0, revenue=0}); otherwise the illicit column is required and
// revenue handling follows the missing-revenue rules below.
struct CsvSchema {
    std::string sgd_id = "sgd.id";
    std::string sgd_date = "sgd.date";
    std::string importer_id = "importer.id";
    std::string declarant_id = "declarant.id";
    std::string country = "country";
    std::string office_id = "office.id";
    std::string tariff_code = "tariff.code";
    std::string quantity = "quantity";
    std::string gross_weight = "gross.weight";
    std::string fob_value = "fob.value";
    std::string cif_value = "cif.value";
    std::string total_taxes = "total.taxes";
    std::string illicit = "illicit";
    std::string revenue = "revenue";
};

struct RowReject {
    long long line_number = 0;  // physical line in the file, 1-based
    std::string reason;
};

struct ParseResult {
    std::vector<LabeledDeclaration> items;  // file order, labels hidden
    std::vector<RowReject> rejects;
};

class SchemaError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

namespace csv_detail {

// Splits one CSV record. Double quotes delimit fields; "" inside a quoted
// field is a literal quote.
inline std::vector<std::string> split_record(const std::string& line) {
    std::vector<std::string> out;
    std::string field;
    bool quoted = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
        const char c = line[i];
        if (quoted) {
            if (c == '"') {
                if (i + 1 < line.size() && line[i + 1] == '"') {
                    field += '"';
                    ++i;
                } else {
                    quoted = false;
                }
            } else {
                field += c;
            }
        } else if (c == '"') {
            quoted = true;
        } else if (c == ',') {
            out.push_back(std::move(field));
            field.clear();
        } else if (c != '\r') {
            field += c;
        }
    }
    out.push_back(std::move(field));
    return out;
}

inline std::string quote_if_needed(const std::string& s) {
    if (s.find_first_of(",\"\n") == std::string::npos) return s;
    std::string out = "\"";
    for (char c : s) {
        if (c == '"') out += "\"\"";
        else out += c;
    }
    out += '"';
    return out;
}

// Full-consumption numeric parse; nullopt on empty or trailing garbage.
inline bool parse_number(const std::string& s, double& out) {
    if (s.empty()) return false;
    char* end = nullptr;
    out = std::strtod(s.c_str(), &end);
    return end == s.c_str() + s.size() && std::isfinite(out);
}

inline std::string fmt_fixed_or_exact(double v, int decimals) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.*f", decimals, v);
    if (std::strtod(buf, nullptr) == v) return buf;
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

inline std::string fmt_quantity(double v) {
    if (v == std::floor(v) && std::abs(v) < 1e15) {
        char buf[32];
        std::snprintf(buf, sizeof(buf), "%.0f", v);
        return buf;
    }
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

}  // namespace csv_detail

// Parses CSV import declarations. Rows violating field formats or the
// declaration invariants land in the rejects report with a reason; they are
// never silently dropped. All parsed labels start hidden.
inline ParseResult parse_declarations(std::istream& in, const CsvSchema& schema = {}) {
    ParseResult result;
    std::string line;
    if (!std::getline(in, line)) throw SchemaError("empty input: missing header row");
    const std::vector<std::string> header = csv_detail::split_record(line);

    std::map<std::string, std::size_t> col;
    for (std::size_t i = 0; i < header.size(); ++i) col[header[i]] = i;

    auto require = [&](const std::string& name) -> std::size_t {
        auto it = col.find(name);
        if (it == col.end()) throw SchemaError("missing required column: " + name);
        return it->second;
    };

    const std::size_t c_id = require(schema.sgd_id);
    const std::size_t c_date = require(schema.sgd_date);
    const std::size_t c_imp = require(schema.importer_id);
    const std::size_t c_dec = require(schema.declarant_id);
    const std::size_t c_cty = require(schema.country);
    const std::size_t c_off = require(schema.office_id);
    const std::size_t c_hs = require(schema.tariff_code);
    const std::size_t c_qty = require(schema.quantity);
    const std::size_t c_gw = require(schema.gross_weight);
    const std::size_t c_fob = require(schema.fob_value);
    const std::size_t c_cif = require(schema.cif_value);
    const std::size_t c_tax = require(schema.total_taxes);

    const bool labeled = !schema.illicit.empty();
    std::size_t c_ill = 0;
    if (labeled) c_ill = require(schema.illicit);
    // Revenue column may be absent even in labeled files.
    const auto rev_it = schema.revenue.empty() ? col.end() : col.find(schema.revenue);
    const bool has_rev = rev_it != col.end();
    const std::size_t c_rev = has_rev ? rev_it->second : 0;

    long long line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty() || (line.size() == 1 && line[0] == '\r')) continue;
        const std::vector<std::string> f = csv_detail::split_record(line);
        auto reject = [&](const std::string& reason) {
            result.rejects.push_back({line_no, reason});
        };
        if (f.size() != header.size()) {
            reject("wrong field count");
            continue;
        }

        Declaration d;
        d.sgd_id = f[c_id];
        d.importer_id = f[c_imp];
        d.declarant_id = f[c_dec];
        d.country = f[c_cty];
        d.office_id = f[c_off];
        d.tariff_code = f[c_hs];

        const auto date = Date::parse(f[c_date]);
        if (!date) {
            reject("bad sgd.date");
            continue;
        }
        d.sgd_date = *date;

        struct NumField {
            std::size_t idx;
            const char* name;
            double* dst;
        };
        const NumField nums[] = {
            {c_qty, "quantity", &d.quantity},       {c_gw, "gross.weight", &d.gross_weight},
            {c_fob, "fob.value", &d.fob_value},     {c_cif, "cif.value", &d.cif_value},
            {c_tax, "total.taxes", &d.total_taxes},
        };
        bool bad = false;
        for (const auto& nf : nums) {
            double v;
            if (!csv_detail::parse_number(f[nf.idx], v)) {
                reject(std::string("non-numeric ") + nf.name);
                bad = true;
                break;
            }
            if (v < 0) {
                reject(std::string("negative ") + nf.name);
                bad = true;
                break;
            }
            *nf.dst = v;
        }
        if (bad) continue;

        if (d.cif_value < d.fob_value) {
            reject("cif<fob");
            continue;
        }

        InspectionLabel label;
        if (labeled) {
            const std::string& ill = f[c_ill];
            if (ill == "1") label.illicit = true;
            else if (ill == "0") label.illicit = false;
            else {
                reject("bad illicit");
                continue;
            }
            const std::string rev_raw = has_rev ? f[c_rev] : std::string();
            if (rev_raw.empty()) {
                // Missing revenue: fine for clean rows, unscorable for frauds.
                if (label.illicit) {
                    reject("illicit row missing revenue");
                    continue;
                }
                label.revenue = 0.0;
            } else {
                double rev;
                if (!csv_detail::parse_number(rev_raw, rev) || rev < 0) {
                    reject("non-numeric revenue");
                    continue;
                }
                if (!label.illicit && rev > 0) {
                    reject("revenue on licit row");
                    continue;
                }
                label.revenue = label.illicit ? rev : 0.0;
            }
        }
        result.items.emplace_back(std::move(d), label);
    }
    return result;
}

inline ParseResult parse_declarations(const std::string& text, const CsvSchema& schema = {}) {
    std::istringstream in(text);
    return parse_declarations(in, schema);
}

inline const char* canonical_csv_header() {
    return "sgd.id,sgd.date,importer.id,declarant.id,country,office.id,tariff.code,"
           "quantity,gross.weight,fob.value,cif.value,total.taxes,illicit,revenue";
}

// Canonical writer; parse_declarations(write_declarations_csv(items)) == items
// up to the (hidden) visibility flag.
inline void write_declarations_csv(const std::vector<LabeledDeclaration>& items, std::ostream& out) {
    namespace cd = csv_detail;
    out << canonical_csv_header() << '\n';
    for (const auto& it : items) {
        const Declaration& d = it.decl;
        const InspectionLabel& y = it.oracle_label();
        out << cd::quote_if_needed(d.sgd_id) << ',' << d.sgd_date.to_string() << ','
            << cd::quote_if_needed(d.importer_id) << ',' << cd::quote_if_needed(d.declarant_id)
            << ',' << cd::quote_if_needed(d.country) << ',' << cd::quote_if_needed(d.office_id)
            << ',' << cd::quote_if_needed(d.tariff_code) << ',' << cd::fmt_quantity(d.quantity)
            << ',' << cd::fmt_fixed_or_exact(d.gross_weight, 3) << ','
            << cd::fmt_fixed_or_exact(d.fob_value, 2) << ','
            << cd::fmt_fixed_or_exact(d.cif_value, 2) << ','
            << cd::fmt_fixed_or_exact(d.total_taxes, 2) << ',' << (y.illicit ? '1' : '0') << ','
            << cd::fmt_fixed_or_exact(y.revenue, 2) << '\n';
    }
}

inline std::string write_declarations_csv(const std::vector<LabeledDeclaration>& items) {
    std::ostringstream out;
    write_declarations_csv(items, out);
    return out.str();
}

inline void write_rejects_csv(const std::vector<RowReject>& rejects, std::ostream& out) {
    out << "line_number,reason\n";
    for (const auto& r : rejects)
        out << r.line_number << ',' << csv_detail::quote_if_needed(r.reason) << '\n';
}

// Partitions [start, start + num_windows*window_days) into consecutive
// windows. Items outside the span are excluded. Within a window items are
// ordered by date, then input order.
inline std::vector<WeeklyBatch> slice_windows(const std::vector<LabeledDeclaration>& items,
                                              Date start, int num_windows, int window_days) {
    if (num_windows < 1) throw std::invalid_argument("slice_windows: num_windows must be >= 1");
    if (window_days < 1) throw std::invalid_argument("slice_windows: window_days must be >= 1");
    std::vector<WeeklyBatch> batches(static_cast<std::size_t>(num_windows));
    for (int w = 0; w < num_windows; ++w) {
        batches[w].week_index = w;
        batches[w].start_date = start + w * window_days;
        batches[w].end_date = start + (w + 1) * window_days - 1;
    }
    for (const auto& it : items) {
        const int offset = it.decl.sgd_date - start;
        if (offset < 0) continue;
        const int w = offset / window_days;
        if (w >= num_windows) continue;
        batches[w].items.push_back(it);
    }
    for (auto& b : batches) {
        std::stable_sort(b.items.begin(), b.items.end(),
                         [](const LabeledDeclaration& a, const LabeledDeclaration& c) {
                             return a.decl.sgd_date < c.decl.sgd_date;
                         });
    }
    return batches;
}

// Fixed 7-day weeks from the configured start date.
inline std::vector<WeeklyBatch> slice_weeks(const std::vector<LabeledDeclaration>& items,
                                            Date start, int num_weeks) {
    return slice_windows(items, start, num_weeks, 7);
}

}  // namespace customs
