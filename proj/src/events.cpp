#include "ccqm/events.hpp"

#include <istream>
#include <ostream>

#include <json.hpp>

#include "ccqm/errors.hpp"

namespace ccqm {

std::string to_string(EventModel m)
{
    switch (m) {
    case EventModel::grw: return "grw";
    case EventModel::ccqm_jump: return "ccqm_jump";
    case EventModel::split: return "split";
    case EventModel::merge: return "merge";
    case EventModel::deferred_merge: return "deferred_merge";
    }
    return "grw";
}

EventModel event_model_from_string(const std::string& s)
{
    if (s == "grw") return EventModel::grw;
    if (s == "ccqm_jump") return EventModel::ccqm_jump;
    if (s == "split") return EventModel::split;
    if (s == "merge") return EventModel::merge;
    if (s == "deferred_merge") return EventModel::deferred_merge;
    throw ConfigError("unknown event model '" + s + "'");
}

std::string to_json_line(const CollapseEvent& e)
{
    nlohmann::ordered_json j;
    j["time"] = e.time;
    j["model"] = to_string(e.model);
    if (e.particle_index)
        j["particle_index"] = *e.particle_index;
    else
        j["particle_index"] = nullptr;
    j["center"] = e.center;
    j["width_param"] = e.width_param;
    j["v_before"] = e.v_before;
    j["v_after"] = e.v_after;
    j["seed"] = e.seed;
    j["wavefunctions"] = e.wavefunctions;
    return j.dump();
}

CollapseEvent event_from_json_line(const std::string& line)
{
    try {
        const auto j = nlohmann::json::parse(line);
        CollapseEvent e;
        e.time = j.at("time").get<double>();
        e.model = event_model_from_string(j.at("model").get<std::string>());
        if (!j.at("particle_index").is_null()) e.particle_index = j.at("particle_index").get<std::size_t>();
        e.center = j.at("center").get<std::vector<double>>();
        e.width_param = j.at("width_param").get<double>();
        e.v_before = j.at("v_before").get<std::size_t>();
        e.v_after = j.at("v_after").get<std::size_t>();
        e.seed = j.at("seed").get<std::uint64_t>();
        if (j.contains("wavefunctions"))
            e.wavefunctions = j.at("wavefunctions").get<std::vector<std::uint64_t>>();
        return e;
    } catch (const nlohmann::json::exception& ex) {
        throw ConfigError(std::string("malformed event record: ") + ex.what());
    }
}

void write_event_log(std::ostream& out, const std::vector<CollapseEvent>& events)
{
    for (const auto& e : events) out << to_json_line(e) << '\n';
}

std::vector<CollapseEvent> read_event_log(std::istream& in)
{
    std::vector<CollapseEvent> events;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        events.push_back(event_from_json_line(line));
    }
    return events;
}

} // namespace ccqm
