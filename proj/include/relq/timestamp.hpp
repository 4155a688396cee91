#pragma once

// Protocol clock: round, step, substep, ordered lexicographically. The text
// form is "round:SU" with one digit each for step and substep ("1:01").

#include <compare>
#include <cstdio>
#include <string>

#include "hilbert.hpp"  // Error

namespace relq {

struct TimeStamp {
    int round = 0;
    int step = 0;
    int substep = 0;

    auto operator<=>(const TimeStamp&) const = default;

    TimeStamp plus_substeps(int d) const { return TimeStamp{round, step, substep + d}; }

    std::string str() const {
        if (round < 0 || step < 0 || substep < 0) throw Error("negative time component");
        if (step > 9 || substep > 9)
            throw Error("time " + std::to_string(round) + ":" + std::to_string(step) + "." +
                        std::to_string(substep) + " does not fit the digit format");
        char buf[32];
        std::snprintf(buf, sizeof buf, "%d:%d%d", round, step, substep);
        return buf;
    }

    static TimeStamp parse(const std::string& text) {
        const auto colon = text.find(':');
        if (colon == std::string::npos || colon == 0 || text.size() != colon + 3)
            throw Error("bad time '" + text + "': want round:SU with one step and one substep digit");
        for (std::size_t i = 0; i < text.size(); ++i) {
            if (i == colon) continue;
            if (text[i] < '0' || text[i] > '9') throw Error("bad time '" + text + "': non-digit");
        }
        TimeStamp t;
        t.round = std::stoi(text.substr(0, colon));
        t.step = text[colon + 1] - '0';
        t.substep = text[colon + 2] - '0';
        return t;
    }
};

}  // namespace relq
