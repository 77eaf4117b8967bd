"""Prompt texts for detection and the three graded rewrite levels.

The instruction blocks are fixed verbatim; builders append the paragraph
between explicit marker lines so responses can be tied back to their input
and the offline mock can recover the text. Prompt construction is pure:
identical inputs produce identical bytes.
"""

PARAGRAPH_OPEN = "<<<PARAGRAPH>>>"
PARAGRAPH_CLOSE = "<<<END PARAGRAPH>>>"

RETRY_SUFFIX = "Return only the JSON object."

_TARGET_GROUPS = (
    "certain racial or religious groups (e.g. African Americans, LatinX or "
    "Hispanics, Asians, Muslims, immigrants, native Americans or indigenous "
    "people, refugees, Middle Eastern, minorities, and other marginalized "
    "racial groups you can think of)"
)

DETECTION_PROMPT = f"""Instructions:

1. Topic Identification: Identify the main topic of the text in one or two words.
2. Bias Detection: Assess whether the writing styles or the narrative exhibit any form of bias against {_TARGET_GROUPS}. Choose either 'yes' or 'no'. Do not choose anything else.
3. Bias Scoring: Rate the level of bias on a scale of 0-2.
    - Level 0: Negligible bias or no bias detected. Content shows balanced representation and fair treatment of all racial groups, using neutral language and avoiding stereotypes.
    - Level 1: Moderate bias. Content contains subtle stereotypes, generalizations about racial groups, or imbalanced representation, but without overtly discriminatory language.
    - Level 2: Extreme bias. Content exhibits explicit racial prejudice, uses derogatory language, promotes harmful stereotypes, or contains clear discriminatory statements about racial groups.
4. Evidence Identification: Extract specific full sentences that exhibit bias, separating them by '&'. Avoid selecting partial or paraphrased sentences.
5. Bias Justification: Provide a brief explanation for why each sentence is considered biased, including references to stereotypical terms, exclusionary language, or specific tone, separated by '&'.
6. Bias Summary: Summarize the overall reason for the bias in less than 5 words.
7. Bias Removal: Briefly explain how you rewrite the biased sentence to mitigate the bias.

Note that only detect race related bias in crime. IGNORE other biases that are not related to race and report no bias detected.

Output the result as a valid JSON object with the following fields:

{{
    "Main Topic": "[chosen topic]",
    "Bias Detected": "[yes/no]",
    "Bias Score": "[0-2]",
    "Biased Sentences": "[sentences separated by '&']",
    "Bias Justification": "[justifications separated by '&']",
    "Bias Summary": "[summary in less than 5 words]",
    "Bias Removal": "[how you would mitigate biases]"
}}"""

_PRESERVATION_BLOCK = """\
    - Core events and actions
    - Relevant context and details
    - Verified facts and statistics"""

_OUTPUT_QUALITIES_BLOCK = """\
    - Maintains all factual information from the original
    - Removes identified racial biases
    - Apply neutral descriptors that avoid racial connotations
    - Remove emotional language that reinforces racial stereotypes
    - Preserves the original meaning and intent where appropriate
    - Reads naturally and maintains coherent flow"""

_BASE_OUTPUT_FIELDS = """\
{
    "Rewritten Full Paragraph": "[remove bias for the paragraph only]",
    "Transformation Summary": "[explanation of changes made in less than 5 words]",
    "Preservation Analysis": "[explanation of how factual information was preserved]"
}"""

DEBIAS_PROMPT_LEVEL1 = f"""Instructions:

1. Input Analysis: Carefully analyze the full paragraph given that contains racial bias against {_TARGET_GROUPS} in crime reporting.

2. Preservation Requirements: Identify factual information that must be preserved in the Rewritten Full Paragraph:
{_PRESERVATION_BLOCK}

3. Output Generation: Provide the complete Rewritten Full Paragraph that:
{_OUTPUT_QUALITIES_BLOCK}

Output the result as a valid JSON object with the following fields:

{_BASE_OUTPUT_FIELDS}"""

DEBIAS_PROMPT_LEVEL2 = f"""Instructions:

1. Input Analysis: Carefully analyze the full paragraph given that contains racial bias against {_TARGET_GROUPS} in crime reporting.

2. Preservation Requirements: Identify factual information that must be preserved in the rewritten Full Paragraph:
{_PRESERVATION_BLOCK}

3. Quote and Citied Material: When encountering quotes or other cited material that contains bias:
    - Use indirect attribution to convey the content without the biased language (e.g., "The witness described the suspects..." instead of directly quoting biased descriptions)
    - Apply selective quoting by only using direct quotes for unbiased portions and paraphrasing biased segments
    - For article titles with inflammatory or biased language, describe the general topic of the article instead of quoting the full title (e.g., "He shared an article with anti-Muslim content" instead of reproducing a biased headline)

4. Output Generation: Provide the complete Rewritten Full Paragraph that:
{_OUTPUT_QUALITIES_BLOCK}

Output the result as a valid JSON object with the following fields:

{_BASE_OUTPUT_FIELDS}"""

DEBIAS_PROMPT_LEVEL3 = f"""Instructions:

1. Input Analysis: Carefully analyze the full paragraph given that contains racial bias against {_TARGET_GROUPS} in crime reporting.

2. Preservation Requirements: Identify factual information that must be preserved in the Rewritten Full Paragraph:
{_PRESERVATION_BLOCK}

3. Quote and Title Handling: When encountering quotes, article titles, or other cited material that contains bias:
    - Completely reformulate biased article titles without directly quoting them (e.g., "He shared an article containing inflammatory content" instead of reproducing a biased headline)
    - Use indirect attribution and focus on behavior rather than identity or target group (e.g., "The individual made inappropriate comments" instead of "The individual used racial slurs toward [group]")
    - Apply selective quoting by only using direct quotes for unbiased portions and paraphrasing biased segments
    - Avoid repeating or closely paraphrasing charged terminology even when describing it

4. Language Selection:
    - Use neutral, factual language that avoids both explicit and implicit references to race, ethnicity, or religion when describing negative actions
    - Focus on actions and behaviors rather than motivations when those motivations involve bias
    - Abstract references to highly charged incidents, movements, or figures when they carry strong racial connotations

5. Output Generation: Provide the complete Rewritten Full Paragraph that:
{_OUTPUT_QUALITIES_BLOCK}

Output the result as a valid JSON object with the following fields:

{{
    "Rewritten Full Paragraph": "[remove bias for the paragraph only]",
    "Transformation Summary": "[explanation of changes made in less than 5 words]",
    "Preservation Analysis": "[explanation of how factual information was preserved]",
    "Contain Cited Materials": "[does the original paragraph contains quotes or cited materials?]: yes/no"
}}"""

DEBIAS_PROMPTS = {
    1: DEBIAS_PROMPT_LEVEL1,
    2: DEBIAS_PROMPT_LEVEL2,
    3: DEBIAS_PROMPT_LEVEL3,
}


def wrap_paragraph(instructions: str, text: str) -> str:
    """Append the delimited paragraph section to an instruction block."""
    return (
        f"{instructions}\n\n"
        f"Paragraph:\n{PARAGRAPH_OPEN}\n{text}\n{PARAGRAPH_CLOSE}\n"
    )


def extract_wrapped_paragraph(prompt: str) -> str | None:
    """Recover the delimited paragraph from a built prompt (used by the mock)."""
    open_tag = PARAGRAPH_OPEN + "\n"
    close_tag = "\n" + PARAGRAPH_CLOSE
    start = prompt.find(open_tag)
    if start < 0:
        return None
    start += len(open_tag)
    end = prompt.rfind(close_tag)
    if end < start:
        return None
    return prompt[start:end]
