#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace ccqm {

enum class EventModel { grw, ccqm_jump, split, merge, deferred_merge };

std::string to_string(EventModel m);
EventModel event_model_from_string(const std::string& s);

/// One collapse, split or merge. `center` is a configuration-space point for
/// ccqm_jump, a single particle's position for grw, and empty otherwise.
/// `width_param` holds alpha (grw), epsilon (ccqm_jump) or the merge
/// probability (merge, deferred_merge).
struct CollapseEvent {
    double time = 0.0;
    EventModel model = EventModel::grw;
    std::optional<std::size_t> particle_index;
    std::vector<double> center;
    double width_param = 0.0;
    std::size_t v_before = 0;
    std::size_t v_after = 0;
    std::uint64_t seed = 0;
    /// Registry identifiers of the wavefunctions involved (inputs, then outputs).
    std::vector<std::uint64_t> wavefunctions;

    bool operator==(const CollapseEvent&) const = default;
};

/// Single-line JSON record with keys in fixed order.
std::string to_json_line(const CollapseEvent& e);
CollapseEvent event_from_json_line(const std::string& line);

void write_event_log(std::ostream& out, const std::vector<CollapseEvent>& events);
std::vector<CollapseEvent> read_event_log(std::istream& in);

} // namespace ccqm
