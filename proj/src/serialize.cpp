#include "dsnsched/serialize.hpp"

#include <fstream>
#include <sstream>

#include <json.hpp>

#include "dsnsched/errors.hpp"

namespace dsnsched {

using json = nlohmann::ordered_json;

namespace {

json windows_to_json(const WindowSet& set) {
  json arr = json::array();
  for (const auto& w : set.windows()) {
    arr.push_back(json::array({w.start, w.end}));
  }
  return arr;
}

WindowSet windows_from_json(const json& arr, const std::string& field) {
  if (!arr.is_array()) throw ParseError(field + ": expected array of [start, end]");
  std::vector<TimeWindow> windows;
  for (const auto& pair : arr) {
    if (!pair.is_array() || pair.size() != 2 || !pair[0].is_number_integer() ||
        !pair[1].is_number_integer()) {
      throw ParseError(field + ": window must be a [start, end] integer pair");
    }
    TimeWindow w{pair[0].get<Seconds>(), pair[1].get<Seconds>()};
    if (w.start >= w.end) {
      throw ParseError(field + ": window start must be below end");
    }
    windows.push_back(w);
  }
  return WindowSet(std::move(windows));
}

template <typename T>
T require(const json& obj, const char* key, const std::string& where) {
  if (!obj.contains(key)) {
    throw ParseError(where + ": missing field '" + key + "'");
  }
  try {
    return obj.at(key).get<T>();
  } catch (const json::exception&) {
    throw ParseError(where + ": field '" + key + "' has the wrong type");
  }
}

}  // namespace

std::string problem_to_json(const WeekProblem& problem) {
  json doc;
  doc["week_label"] = problem.week_label;
  doc["max_requests"] = problem.max_requests;
  json antennas = json::array();
  for (const auto& a : problem.antennas) {
    json ja;
    ja["id"] = a.id;
    ja["bounds"] = json::array({a.week_bounds.start, a.week_bounds.end});
    ja["maintenance"] = windows_to_json(a.maintenance);
    antennas.push_back(std::move(ja));
  }
  doc["antennas"] = std::move(antennas);
  json requests = json::array();
  for (const auto& r : problem.requests) {
    json jr;
    jr["id"] = r.request_id;
    jr["mission"] = r.mission_id;
    jr["requested_s"] = r.requested_duration;
    jr["min_s"] = r.min_duration;
    jr["setup_s"] = r.setup;
    jr["teardown_s"] = r.teardown;
    jr["combos"] = r.antenna_combos;
    json vps = json::array();
    for (const auto& set : r.view_periods) vps.push_back(windows_to_json(set));
    jr["view_periods"] = std::move(vps);
    requests.push_back(std::move(jr));
  }
  doc["requests"] = std::move(requests);
  return doc.dump(2) + "\n";
}

WeekProblem problem_from_json(const std::string& text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::exception& e) {
    throw ParseError(std::string("problem document is not valid JSON: ") +
                     e.what());
  }
  if (!doc.is_object()) throw ParseError("problem document must be an object");

  WeekProblem problem;
  problem.week_label = require<std::string>(doc, "week_label", "problem");
  problem.max_requests = require<int>(doc, "max_requests", "problem");
  if (!doc.contains("antennas") || !doc["antennas"].is_array()) {
    throw ParseError("problem: missing field 'antennas'");
  }
  for (const auto& ja : doc["antennas"]) {
    Antenna a;
    a.id = require<std::string>(ja, "id", "antenna");
    auto bounds = require<std::vector<Seconds>>(ja, "bounds", "antenna " + a.id);
    if (bounds.size() != 2) {
      throw ParseError("antenna " + a.id + ": bounds must be [start, end]");
    }
    a.week_bounds = TimeWindow{bounds[0], bounds[1]};
    if (!ja.contains("maintenance")) {
      throw ParseError("antenna " + a.id + ": missing field 'maintenance'");
    }
    a.maintenance =
        windows_from_json(ja["maintenance"], "antenna " + a.id + " maintenance");
    problem.antennas.push_back(std::move(a));
  }
  if (!doc.contains("requests") || !doc["requests"].is_array()) {
    throw ParseError("problem: missing field 'requests'");
  }
  for (const auto& jr : doc["requests"]) {
    TrackRequest r;
    r.request_id = require<int>(jr, "id", "request");
    const std::string where = "request " + std::to_string(r.request_id);
    r.mission_id = require<std::string>(jr, "mission", where);
    r.requested_duration = require<Seconds>(jr, "requested_s", where);
    r.min_duration = require<Seconds>(jr, "min_s", where);
    r.setup = require<Seconds>(jr, "setup_s", where);
    r.teardown = require<Seconds>(jr, "teardown_s", where);
    r.antenna_combos =
        require<std::vector<std::vector<std::string>>>(jr, "combos", where);
    if (!jr.contains("view_periods") || !jr["view_periods"].is_array()) {
      throw ParseError(where + ": missing field 'view_periods'");
    }
    for (const auto& vp : jr["view_periods"]) {
      r.view_periods.push_back(windows_from_json(vp, where + " view_periods"));
    }
    problem.requests.push_back(std::move(r));
  }
  validate_problem(problem);
  return problem;
}

void write_text_file(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open " + path + " for writing");
  out << content;
  if (!out) throw IoError("failed writing " + path);
}

std::string read_text_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

void save_problem_file(const WeekProblem& problem, const std::string& path) {
  write_text_file(path, problem_to_json(problem));
}

WeekProblem load_problem_file(const std::string& path) {
  return problem_from_json(read_text_file(path));
}

std::string schedule_to_json(const Schedule& schedule,
                             const WeekProblem& problem) {
  json doc;
  doc["week_label"] = problem.week_label;
  json tracks = json::array();
  for (const auto& t : schedule.tracks) {
    json jt;
    jt["request_id"] = t.request_id;
    jt["mission"] = problem.requests[t.request_id].mission_id;
    jt["combo_index"] = t.combo_index;
    jt["combo"] = t.combo;
    jt["window"] = json::array({t.window.start, t.window.end});
    if (t.setup_window) {
      jt["setup"] = json::array({t.setup_window->start, t.setup_window->end});
    }
    if (t.teardown_window) {
      jt["teardown"] =
          json::array({t.teardown_window->start, t.teardown_window->end});
    }
    tracks.push_back(std::move(jt));
  }
  doc["tracks"] = std::move(tracks);
  json busy;
  for (const auto& [antenna_id, set] : schedule.antenna_busy) {
    busy[antenna_id] = windows_to_json(set);
  }
  doc["antenna_busy"] = std::move(busy);
  return doc.dump(2) + "\n";
}

Schedule schedule_from_json(const std::string& text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::exception& e) {
    throw ParseError(std::string("schedule document is not valid JSON: ") +
                     e.what());
  }
  Schedule schedule;
  if (!doc.contains("tracks") || !doc["tracks"].is_array()) {
    throw ParseError("schedule: missing field 'tracks'");
  }
  for (const auto& jt : doc["tracks"]) {
    Track t;
    t.request_id = require<int>(jt, "request_id", "track");
    t.combo_index = require<int>(jt, "combo_index", "track");
    t.combo = require<std::vector<std::string>>(jt, "combo", "track");
    auto w = require<std::vector<Seconds>>(jt, "window", "track");
    if (w.size() != 2) throw ParseError("track: window must be [start, end]");
    t.window = TimeWindow{w[0], w[1]};
    if (jt.contains("setup")) {
      auto s = jt["setup"].get<std::vector<Seconds>>();
      t.setup_window = TimeWindow{s[0], s[1]};
    }
    if (jt.contains("teardown")) {
      auto s = jt["teardown"].get<std::vector<Seconds>>();
      t.teardown_window = TimeWindow{s[0], s[1]};
    }
    schedule.tracks.push_back(std::move(t));
  }
  if (doc.contains("antenna_busy")) {
    for (const auto& [antenna_id, arr] : doc["antenna_busy"].items()) {
      schedule.antenna_busy[antenna_id] =
          windows_from_json(arr, "antenna_busy " + antenna_id);
    }
  }
  return schedule;
}

std::string schedule_to_csv(const Schedule& schedule,
                            const WeekProblem& problem) {
  std::ostringstream out;
  out << "request_id,mission,combo,start_s,end_s,duration_s\n";
  for (const auto& t : schedule.tracks) {
    std::string combo;
    for (std::size_t i = 0; i < t.combo.size(); ++i) {
      if (i > 0) combo += "+";
      combo += t.combo[i];
    }
    out << t.request_id << "," << problem.requests[t.request_id].mission_id
        << "," << combo << "," << t.window.start << "," << t.window.end << ","
        << t.window.duration() << "\n";
  }
  return out.str();
}

}  // namespace dsnsched
