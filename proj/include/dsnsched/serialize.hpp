#pragma once

#include <string>

#include "dsnsched/problem.hpp"

namespace dsnsched {

// Problem-set document (JSON). Serialization is canonical: field order and
// formatting are fixed, so save -> load -> save is byte-identical.
std::string problem_to_json(const WeekProblem& problem);
WeekProblem problem_from_json(const std::string& text);

void save_problem_file(const WeekProblem& problem, const std::string& path);
WeekProblem load_problem_file(const std::string& path);

// Schedule export: structured document plus a flat CSV
// (request_id, mission, combo, start_s, end_s, duration_s).
std::string schedule_to_json(const Schedule& schedule,
                             const WeekProblem& problem);
Schedule schedule_from_json(const std::string& text);
std::string schedule_to_csv(const Schedule& schedule,
                            const WeekProblem& problem);

void write_text_file(const std::string& path, const std::string& content);
std::string read_text_file(const std::string& path);

}  // namespace dsnsched
