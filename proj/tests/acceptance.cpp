#include <cstdlib>
#include <iostream>
#include <string>

#include "bloewner/acceptance.hpp"

// Usage: acceptance [SCALE] [ID...]
int main(int argc, char** argv) {
    bloewner::AcceptanceOptions o;
    std::vector<int> ids;
    if (argc > 1) o.replica_scale = std::stod(argv[1]);
    for (int i = 2; i < argc; ++i) ids.push_back(std::stoi(argv[i]));
    if (ids.empty()) {
        for (int i = 1; i <= bloewner::kCriterionCount; ++i) ids.push_back(i);
    }
    int failed = 0;
    for (int id : ids) {
        bloewner::CriterionResult r;
        try {
            r = bloewner::run_criterion(id, o);
        } catch (const std::exception& e) {
            r.id = id;
            r.title = "error";
            r.summary = e.what();
        }
        std::cout << bloewner::result_line(r) << "\n";
        for (const auto& d : r.diagnostics) std::cout << "    " << d << "\n";
        std::cout.flush();
        if (!r.pass) ++failed;
    }
    std::cout << (ids.size() - failed) << "/" << ids.size() << " criteria passed\n";
    return failed == 0 ? EXIT_SUCCESS : EXIT_FAILURE;
}
