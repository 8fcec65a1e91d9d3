//! Student-facing copy. Kept in one place so wording can be revised without
//! touching the stage logic.

use crate::stage::Stage;

pub const FALLBACK_HINT: &str = "Look again at the failing test case.";

pub const ARTICULATION_RULE: &str = "Your response must contain at least one letter or number.";

pub fn stage_prompt(stage: Stage) -> &'static str {
    match stage {
        Stage::Predict => "What do you think the program will output for these inputs?",
        Stage::Run => "Run the program with the test case inputs. Was your prediction right?",
        Stage::SpotTheDefect => {
            "What is the difference between the expected output and the actual output?"
        }
        Stage::InspectTheCode => {
            "What might be causing the error? Re-read the description, the code and the test cases. You can run the program with other inputs."
        }
        Stage::FindTheError => "Which line is the error on?",
        Stage::FixTheError => "Fix the error, then describe the change you made.",
        Stage::Test => {
            "Run the program to test your fix. Did your changes fix the error?"
        }
        Stage::Modify => "Modify the program.",
        Stage::Make => "Make your own version of the program. You can change anything you like.",
    }
}

/// Find-stage copy for errors spread over several lines.
pub const FIND_MULTI_LINE_PROMPT: &str =
    "Where is the error? Describe its location as specifically as you can.";

pub const TEST_FAILED_ADVICE: &str =
    "Going back to Inspect the Code to refine your hypothesis is recommended. You can also try another fix straight away.";

pub const FIND_MISSED_ADVICE: &str =
    "That is not the line with the error. Go back to Inspect the Code (recommended) or choose a different line.";
