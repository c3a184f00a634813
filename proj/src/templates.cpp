// Built-in sentence templates and their filler vocabularies.

#include "negascope/dataset.hpp"
#include "negascope/errors.hpp"

namespace negascope {

namespace {

const std::vector<std::string> kNames = {
    "James",   "Mary",     "John",     "Patricia", "Robert",   "Jennifer", "Michael",
    "Linda",   "William",  "Elizabeth", "David",   "Barbara",  "Richard",  "Susan",
    "Joseph",  "Jessica",  "Thomas",   "Sarah",    "Charles",  "Karen",    "Daniel",
    "Nancy",   "Matthew",  "Lisa",     "Anthony",  "Betty",    "Mark",     "Margaret",
    "Donald",  "Sandra",   "Steven",   "Ashley",   "Paul",     "Emily",    "Andrew",
    "Donna",   "Joshua",   "Michelle", "Kevin",    "Carol",    "Brian",    "Amanda",
    "George",  "Melissa",  "Edward",   "Deborah",  "Ronald",   "Stephanie", "Timothy",
    "Rebecca", "Jason",    "Laura",    "Jeffrey",  "Helen",    "Ryan",     "Sharon",
    "Jacob",   "Cynthia",  "Gary",     "Kathleen", "Alice",    "Bob"};

// (country, capital)
const std::vector<std::pair<std::string, std::string>> kCapitals = {
    {"France", "Paris"},           {"Germany", "Berlin"},         {"Italy", "Rome"},
    {"Spain", "Madrid"},           {"Portugal", "Lisbon"},        {"Japan", "Tokyo"},
    {"China", "Beijing"},          {"India", "New Delhi"},        {"Russia", "Moscow"},
    {"Canada", "Ottawa"},          {"Mexico", "Mexico City"},     {"Brazil", "Brasilia"},
    {"Argentina", "Buenos Aires"}, {"Chile", "Santiago"},         {"Peru", "Lima"},
    {"Colombia", "Bogota"},        {"Venezuela", "Caracas"},      {"Ecuador", "Quito"},
    {"Uruguay", "Montevideo"},     {"Paraguay", "Asuncion"},      {"Cuba", "Havana"},
    {"Jamaica", "Kingston"},       {"Egypt", "Cairo"},            {"Kenya", "Nairobi"},
    {"Nigeria", "Abuja"},          {"Ghana", "Accra"},            {"Ethiopia", "Addis Ababa"},
    {"Morocco", "Rabat"},          {"Algeria", "Algiers"},        {"Tunisia", "Tunis"},
    {"Libya", "Tripoli"},          {"Sudan", "Khartoum"},         {"Uganda", "Kampala"},
    {"Tanzania", "Dodoma"},        {"Zambia", "Lusaka"},          {"Zimbabwe", "Harare"},
    {"Angola", "Luanda"},          {"Senegal", "Dakar"},          {"Mali", "Bamako"},
    {"Niger", "Niamey"},           {"Chad", "N'Djamena"},         {"Cameroon", "Yaounde"},
    {"Rwanda", "Kigali"},          {"Somalia", "Mogadishu"},      {"Madagascar", "Antananarivo"},
    {"Mozambique", "Maputo"},      {"Namibia", "Windhoek"},       {"Botswana", "Gaborone"},
    {"Malawi", "Lilongwe"},        {"Gabon", "Libreville"},       {"Liberia", "Monrovia"},
    {"Guinea", "Conakry"},         {"Togo", "Lome"},              {"Eritrea", "Asmara"},
    {"Mauritania", "Nouakchott"},  {"Sierra Leone", "Freetown"},  {"Australia", "Canberra"},
    {"New Zealand", "Wellington"}, {"Fiji", "Suva"},              {"Indonesia", "Jakarta"},
    {"Malaysia", "Kuala Lumpur"},  {"Thailand", "Bangkok"},       {"Vietnam", "Hanoi"},
    {"Cambodia", "Phnom Penh"},    {"Laos", "Vientiane"},         {"South Korea", "Seoul"},
    {"North Korea", "Pyongyang"},  {"Mongolia", "Ulaanbaatar"},   {"Nepal", "Kathmandu"},
    {"Bhutan", "Thimphu"},         {"Bangladesh", "Dhaka"},       {"Pakistan", "Islamabad"},
    {"Afghanistan", "Kabul"},      {"Iran", "Tehran"},            {"Iraq", "Baghdad"},
    {"Syria", "Damascus"},         {"Lebanon", "Beirut"},         {"Jordan", "Amman"},
    {"Saudi Arabia", "Riyadh"},    {"Oman", "Muscat"},            {"Qatar", "Doha"},
    {"Kuwait", "Kuwait City"},     {"Bahrain", "Manama"},         {"Turkey", "Ankara"},
    {"Greece", "Athens"},          {"Cyprus", "Nicosia"},         {"Bulgaria", "Sofia"},
    {"Romania", "Bucharest"},      {"Hungary", "Budapest"},       {"Austria", "Vienna"},
    {"Switzerland", "Bern"},       {"Belgium", "Brussels"},       {"Denmark", "Copenhagen"},
    {"Norway", "Oslo"},            {"Sweden", "Stockholm"},       {"Finland", "Helsinki"},
    {"Iceland", "Reykjavik"},      {"Ireland", "Dublin"},         {"Poland", "Warsaw"},
    {"Slovakia", "Bratislava"},    {"Slovenia", "Ljubljana"},     {"Croatia", "Zagreb"},
    {"Serbia", "Belgrade"},        {"Montenegro", "Podgorica"},   {"Albania", "Tirana"},
    {"North Macedonia", "Skopje"}, {"Ukraine", "Kyiv"},           {"Belarus", "Minsk"},
    {"Moldova", "Chisinau"},       {"Lithuania", "Vilnius"},      {"Latvia", "Riga"},
    {"Estonia", "Tallinn"},        {"Georgia", "Tbilisi"},        {"Armenia", "Yerevan"},
    {"Azerbaijan", "Baku"},        {"Kazakhstan", "Astana"},      {"Uzbekistan", "Tashkent"},
    {"Turkmenistan", "Ashgabat"},  {"Kyrgyzstan", "Bishkek"},     {"Tajikistan", "Dushanbe"},
    {"Malta", "Valletta"},         {"Liechtenstein", "Vaduz"},    {"Scotland", "Edinburgh"},
    {"Wales", "Cardiff"},          {"England", "London"},         {"Panama", "Panama City"},
    {"Costa Rica", "San Jose"},    {"Nicaragua", "Managua"},      {"Honduras", "Tegucigalpa"},
    {"Guatemala", "Guatemala City"}, {"El Salvador", "San Salvador"}, {"Belize", "Belmopan"},
    {"Haiti", "Port-au-Prince"},   {"Barbados", "Bridgetown"},    {"Suriname", "Paramaribo"},
    {"Guyana", "Georgetown"},      {"Papua New Guinea", "Port Moresby"}, {"Samoa", "Apia"},
    {"Vanuatu", "Port Vila"},      {"Taiwan", "Taipei"},          {"Greenland", "Nuuk"},
    {"Lesotho", "Maseru"},         {"Mauritius", "Port Louis"},   {"Cape Verde", "Praia"},
    {"South Sudan", "Juba"},       {"Equatorial Guinea", "Malabo"}, {"East Timor", "Dili"},
};

std::vector<std::string> firsts(const std::vector<std::pair<std::string, std::string>>& v) {
    std::vector<std::string> out;
    for (const auto& p : v) out.push_back(p.first);
    return out;
}

std::vector<std::string> seconds(const std::vector<std::pair<std::string, std::string>>& v) {
    std::vector<std::string> out;
    for (const auto& p : v) out.push_back(p.second);
    return out;
}

using F = NegationForm;

// Copular templates: "The X is" / "The X is not" / "The X is never" / "No X is".
const CueText kCopAff{"The", ""};
const std::vector<std::pair<F, CueText>> kCopNeg = {
    {F::not_, {"The", " not"}}, {F::never, {"The", " never"}}, {F::no, {"No", ""}}};

std::vector<std::pair<F, CueText>> verb_forms(const std::string& base, const std::string& third) {
    return {{F::does_not, {"", " does not " + base}},
            {F::doesnt, {"", " doesn't " + base}},
            {F::never, {"", " never " + third}}};
}

std::vector<Template> make_templates() {
    std::vector<Template> t;

    t.push_back({"capital_of",
                 {"{lead} capital of {x} is{cue}", "{lead} capital city of {x} is{cue}",
                  "{lead} official capital of {x} is{cue}",
                  "{lead} national capital of {x} is{cue}"},
                 firsts(kCapitals),
                 seconds(kCapitals),
                 true,
                 kCopAff,
                 kCopNeg});

    t.push_back({"can_ability",
                 {"{x}{cue}"},
                 kNames,
                 {"swim",   "jump",  "run",    "sing",  "dance",  "read",   "write",  "cook",
                  "drive",  "fly",   "climb",  "ski",   "skate",  "paint",  "draw",   "whistle",
                  "knit",   "sew",   "type",   "juggle", "dive",  "surf",   "ride",   "speak",
                  "walk",   "fish",  "sail",   "row",   "box",    "code",   "bake",   "hike",
                  "sketch", "yodel", "rap",    "golf",  "bowl",   "fence",  "wrestle", "kick"},
                 false,
                 {"", " can"},
                 {{F::never, {"", " can never"}},
                  {F::does_not, {"", " does not"}},
                  {F::doesnt, {"", " doesn't"}},
                  {F::cannot, {"", " cannot"}},
                  {F::cant, {"", " can't"}}}});

    t.push_back({"likes",
                 {"{x}{cue}"},
                 kNames,
                 {"pizza",  "coffee", "tea",     "chocolate", "music",   "jazz",    "football",
                  "soccer", "basketball", "tennis", "movies", "books",   "cats",    "dogs",
                  "pasta",  "sushi",  "rice",    "apples",    "bananas", "cheese",  "ice cream",
                  "poetry", "history", "math",   "science",   "art",     "dancing", "hiking",
                  "swimming", "cooking"},
                 false,
                 {"", " likes"},
                 verb_forms("like", "likes")});

    t.push_back({"is_a_job",
                 {"{x} is{cue}", "{x} was{cue}"},
                 kNames,
                 {"doctor",   "teacher",   "nurse",     "lawyer",     "pilot",     "farmer",
                  "baker",    "chef",      "dentist",   "writer",     "singer",    "painter",
                  "plumber",  "carpenter", "soldier",   "banker",     "lecturer",  "librarian",
                  "mechanic", "surgeon",   "tailor",    "waiter",     "journalist", "programmer",
                  "scientist", "professor", "pharmacist", "firefighter", "cashier", "poet"},
                 false,
                 {"", " a"},
                 {{F::not_, {"", " not a"}}, {F::never, {"", " never a"}}, {F::no, {"", " no"}}}});

    t.push_back({"color_is",
                 {"{lead} {x} is{cue}", "{lead} {x} was{cue}"},
                 {"car",    "house",  "door",   "shirt",   "dress",  "bag",    "ball",   "cup",
                  "chair",  "table",  "wall",   "flower",  "bird",   "hat",    "box",    "book",
                  "pen",    "bike",   "boat",   "kite",    "fence",  "roof",   "sofa",   "lamp",
                  "rug",    "mug",    "towel",  "scarf",   "jacket", "bottle", "bucket", "shoe",
                  "sock",   "bowl",   "plate",  "vase",    "curtain", "pillow", "blanket", "balloon"},
                 {"red", "blue", "green", "yellow", "black", "white", "orange", "purple", "pink",
                  "brown", "gray", "silver"},
                 false,
                 kCopAff,
                 kCopNeg});

    t.push_back({"has_object",
                 {"{x}{cue} a"},
                 kNames,
                 {"pen",    "pencil", "book",     "laptop",  "phone",   "car",      "dog",
                  "cat",    "bike",   "watch",    "wallet",  "key",     "hat",      "camera",
                  "guitar", "piano",  "notebook", "backpack", "jacket", "ticket",   "passport",
                  "garden", "house",  "boat",     "computer"},
                 false,
                 {"", " has"},
                 verb_forms("have", "has")});

    t.push_back({"in_container",
                 {"{lead} {x} is{cue} in the", "{lead} {x} was{cue} in the"},
                 {"key",   "coin",   "ring",  "letter", "book",   "phone",  "pen",   "apple",
                  "cookie", "toy",   "ball",  "shoe",   "sock",   "watch",  "card",  "ticket",
                  "map",   "photo",  "knife", "spoon",  "bottle", "candle", "battery", "glove",
                  "scarf"},
                 {"box",    "bag",    "drawer", "basket", "jar",    "cupboard", "fridge",
                  "closet", "suitcase", "bucket", "bowl",  "envelope", "cabinet", "backpack",
                  "wallet", "pocket", "crate",  "barrel", "tin",    "case"},
                 false,
                 kCopAff,
                 kCopNeg});

    t.push_back({"drives_vehicle",
                 {"{x}{cue} a"},
                 kNames,
                 {"car",     "truck",   "bus",     "van",       "taxi",     "tractor",
                  "motorcycle", "bicycle", "scooter", "jeep",   "limousine", "minivan",
                  "pickup",  "sedan",   "tank",    "train",     "tram",     "forklift",
                  "bulldozer", "convertible"},
                 false,
                 {"", " drives"},
                 verb_forms("drive", "drives")});

    return t;
}

} // namespace

const std::vector<Template>& builtin_templates() {
    static const std::vector<Template> templates = make_templates();
    return templates;
}

const Template& builtin_template(std::string_view name) {
    for (const auto& t : builtin_templates()) {
        if (t.name == name) return t;
    }
    throw ArgumentError("unknown template '" + std::string(name) + "'");
}

} // namespace negascope
