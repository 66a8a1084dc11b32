#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "customs/dates.hpp"

namespace customs {

// One import transaction row. Money fields are in a single unconverted
// currency; quantity is a count and gross_weight is kilograms.
struct Declaration {
    std::string sgd_id;
    Date sgd_date;
    std::string importer_id;
    std::string declarant_id;
    std::string country;   // ISO-3
    std::string office_id;
    std::string tariff_code;  // 10-digit HS code
    double quantity = 0;
    double gross_weight = 0;
    double fob_value = 0;
    double cif_value = 0;
    double total_taxes = 0;

    bool operator==(const Declaration&) const = default;
};

// Ground truth revealed by inspection: the binary fraud flag and the extra
// duty collected when the item is fraudulent.
struct InspectionLabel {
    bool illicit = false;
    double revenue = 0.0;  // 0 whenever illicit is false

    bool operator==(const InspectionLabel&) const = default;
};

// Counts label reads that bypass the inspection protocol. Training, feature
// fitting and selection must never observe a hidden label; only metric
// scoring may. A simulation is leak-free iff hidden_reads stays 0 on the
// training path.
struct LabelAudit {
    long long hidden_reads = 0;
};

// A declaration together with its (initially hidden) ground truth. Visibility
// is monotone: reveal() is the only mutation and there is no way back.
class LabeledDeclaration {
public:
    LabeledDeclaration() = default;
    LabeledDeclaration(Declaration d, InspectionLabel label)
        : decl(std::move(d)), label_(label) {}

    Declaration decl;

    bool label_visible() const { return visible_; }
    void reveal() { visible_ = true; }

    // Training/selection path. Returns nullptr and records an audit violation
    // when the label has not been revealed yet.
    const InspectionLabel* training_label(LabelAudit& audit) const {
        if (!visible_) {
            ++audit.hidden_reads;
            return nullptr;
        }
        return &label_;
    }

    // Metric/oracle path: scoring a week against full ground truth.
    const InspectionLabel& oracle_label() const { return label_; }

    bool operator==(const LabeledDeclaration& o) const {
        return decl == o.decl && label_ == o.label_ && visible_ == o.visible_;
    }

private:
    InspectionLabel label_;
    bool visible_ = false;
};

// One 7-day slice of the stream: items with dates in [start_date, end_date],
// ordered by date then input order.
struct WeeklyBatch {
    int week_index = 0;
    Date start_date;
    Date end_date;  // inclusive, start_date + 6
    std::vector<LabeledDeclaration> items;
};

}  // namespace customs
