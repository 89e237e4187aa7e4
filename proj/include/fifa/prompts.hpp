#pragma once

#include <string>
#include <vector>

#include "fifa/error.hpp"

namespace fifa {

// Immutable prompt assets. These are the annotation-pipeline prompts with
// substitution points; tests pin their hashes so any drift is caught, since
// silently changing a prompt changes the data distribution.

inline const std::string kStep3PromptTemplate = R"PROMPT(You are an AI visual assistant that helps humans analyze some images of human faces that have been tampered with by deepfake. You will receive two images, the first is the image A of the face tampered by deepfake and the second is the binary mask image B of the tampered area (a value of 1 (white) indicates the tampered area and a value of 0 (black) indicates the untampered area).

Now, your task is to describe the visible details (artifacts) of the tampered area in the image, using the binary masks provided for the tampered regions of the deepfake tampered image A and image B.
In your answer, please describe the tampered image based on the highlighted area of the binary mask, but do not mention the binary mask. Always assume that you are just looking at the tampered image.
Responses should identify the tampered areas and corresponding detailed descriptions of the forgery in those areas. Use the format [tampered area]: [detailed forgery description].

All the following areas MUST be discussed:
{ concept_list }
Please analyze each area in one sentence.

When providing detailed forgery descriptions, consider the visible details caused by tampering from these perspectives, but do not give an ambiguous, unclear description that is otherwise challenging:
1. Symmetrical Facial Features: Deepfake-generated faces may exhibit unnaturally perfect symmetry, lacking the subtle asymmetry typically found in real faces.
2. Blur or Distortion Around Edges: Deepfake manipulation may introduce blur or distortion around the edges of the face where the manipulation has taken place, especially if the face has been digitally overlaid onto another body.
3. Inconsistent Lighting and Shadows: Deepfake algorithms may struggle to accurately match the lighting and shadows in the original image, leading to discrepancies in lighting direction or intensity across the face.
4. Unnatural Facial Expressions: Deepfakes may produce facial expressions that appear unnatural, exaggerated, or out of sync with the rest of the image.
5. Mismatched Facial Proportions: Deepfake manipulation may result in facial proportions that are inconsistent with the person's gender or age, such as a man's face on a woman's body or vice versa.
6. Inconsistent Skin Texture and Tone: Deepfake-generated faces may exhibit unnatural skin texture or tone, such as overly smooth or pixelated skin, that differs from the surrounding areas.
7. Missing or Inconsistent Eye Reflections: Deepfake manipulation may result in missing or inconsistent reflections in the eyes, which can provide clues about the authenticity of the image.
8. Change hairstyle: Some deepfake algorithms only tamper with hair and may change hair color and hairstyle, or add long hair for boys and short hair for girls.
9. Irregularities in Makeup Application: Deepfake manipulation may introduce makeup styles that are inconsistent with the person's gender or age, or exhibit poor application quality.
10. Contextual Inconsistencies: Deepfake-generated images may contain inconsistencies in the overall context of the image, such as discrepancies in perspective, clothing, or surroundings, that suggest manipulation.
11. Unreasonable accessories: Some deepfake algorithms add glasses, earrings, hats, masks, etc. to the image, and the edges, lighting relationships, and perspective of these accessories may be incorrect.
12. If there are glasses or sunglasses in the picture, please pay special attention to whether the glasses or sunglasses have been tampered with or not, the rims, frames, temples, lenses, etc. of the glasses are very susceptible to imperfections and problems.
)PROMPT";

inline const std::string kStep4PromptTemplate = R"PROMPT(Summarize the descriptions of face forgery areas into a paragraph to make it as clear as possible. The face region words in the summary can be more diverse, but the semantic consistency must be guaranteed.
An index number will be provided for each face forgery area. Please indicate the index number in the summary.

Here is an example:

Input:
Descriptions
left part of chin: Displays inconsistency in skin texture, appearing artificially uniform.
right part of chin: Exhibits disproportionate shadowing inconsistent with light sources.
edges of chin: Subtle distortions suggest digital manipulation at the boundaries.
nasolabial fold of left side: Appears unnaturally softened, lacking typical depth.
nasolabial fold of right side: Exhibits lack of natural shading and depth variation.
Index Numbers
left part of chin: 0
right part of chin: 1
edges of chin: 2
nasolabial fold of left side: 3
nasolabial fold of right side: 4

Summary:
The <0> left side of the chin </0> reveals an unnaturally uniform skin texture, while the <1> right chin area </1> exhibits disproportionate shadowing that contradicts expected lighting. The <2> chin's edges </2> display subtle distortions, indicating possible digital manipulation. Additionally, the <3> left nasolabial fold </3> appears overly smoothed, lacking natural depth, whereas the <4> right nasolabial region </4> fails to show proper shading and depth variation.

Input: [input]
)PROMPT";

inline const std::string kStep3Placeholder = "{ concept_list }";
inline const std::string kStep4Placeholder = "[input]";

// Step-3 prompt: the template verbatim with the concept list substituted,
// one display name per line.
inline std::string build_step3_prompt(const std::vector<std::string>& concepts) {
    if (concepts.empty())
        throw make_error("EmptyConceptList", "step 3 needs at least one concept");
    std::string list;
    for (size_t i = 0; i < concepts.size(); ++i) {
        if (i) list += "\n";
        list += concepts[i];
    }
    std::string prompt = kStep3PromptTemplate;
    size_t pos = prompt.find(kStep3Placeholder);
    prompt.replace(pos, kStep3Placeholder.size(), list);
    return prompt;
}

struct AtomicExplanation {
    std::string concept_slug;
    std::string display_name;
    std::string text;  // one-sentence forgery description
};

// Step-4 prompt: Descriptions block then Index Numbers block, indices
// 0..n-1 in input order.
inline std::string build_step4_prompt(
    const std::vector<AtomicExplanation>& explanations) {
    if (explanations.empty())
        throw make_error("EmptyInput", "step 4 needs at least one explanation");
    std::string input = "Descriptions\n";
    for (const auto& e : explanations)
        input += e.display_name + ": " + e.text + "\n";
    input += "Index Numbers\n";
    for (size_t i = 0; i < explanations.size(); ++i)
        input += explanations[i].display_name + ": " + std::to_string(i) + "\n";
    std::string prompt = kStep4PromptTemplate;
    size_t pos = prompt.find(kStep4Placeholder);
    prompt.replace(pos, kStep4Placeholder.size(), input);
    return prompt;
}

}  // namespace fifa
