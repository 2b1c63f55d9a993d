#ifndef COMBO_DATAGEN_HPP
#define COMBO_DATAGEN_HPP

#include <string>
#include <vector>

namespace combo::datagen {

// CSV plus sidecar schema text for one benchmark dataset. Generation is
// deterministic: the same name always yields the same bytes.
struct GeneratedFiles {
    std::string name;
    std::string csv;
    std::string schema;
};

// balance is the exact classic torque-comparison construction; the other
// names are synthetic stand-ins that reproduce the class structure, column
// kinds, and rough difficulty of the well-known UCI benchmarks they are
// named after.
std::vector<std::string> dataset_names();

GeneratedFiles make_dataset(const std::string& name);

GeneratedFiles make_balance();
GeneratedFiles make_new_thyroid();
GeneratedFiles make_car();
GeneratedFiles make_nursery();
GeneratedFiles make_yeast();
GeneratedFiles make_connect();

// Writes <name>.csv and <name>.schema under out_dir; returns the CSV path.
std::string write_dataset(const std::string& name, const std::string& out_dir);

} // namespace combo::datagen

#endif // COMBO_DATAGEN_HPP
