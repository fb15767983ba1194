"""Writes data/rubrics/mirs.yaml and mirs_kalamazoo.yaml."""
import pathlib

import yaml

ITEMS = [
    ("Opening", "open_discussion", [], ["Greets the patient without introducing self or role", "Gives name or role but not both", "Introduces self and role; asks how to address the patient", "Introduces self and role, addresses the patient by name and checks comfort", "Warm introduction with name, role and purpose; confirms preferred name and sets the patient at ease"]),
    ("Elicits the chief concern and agenda", "open_discussion", [], ["Does not ask why the patient came in", "Asks about one concern and moves on immediately", "Identifies the main concern but does not ask about others", "Identifies the main concern and asks whether there are other concerns", "Elicits the full list of concerns and agrees on an agenda before going deeper"]),
    ("Narrative thread", "gather_information", [], ["Interrupts repeatedly; the patient never tells the story", "Lets the patient start but redirects early with closed questions", "Allows part of the story in the patient's words", "Lets the patient tell the story with few interruptions", "Invites the full story in the patient's words and follows it with focused questions"]),
    ("Sequence of events", "gather_information", [], ["No attempt to establish the sequence of events", "Sequence is established for a small part of the illness", "Sequence is partly established with gaps", "Sequence of events is mostly clear", "Establishes a clear chronological account from onset to the present"]),
    ("Timeline", "gather_information", [], ["No dates or durations obtained", "Obtains one date or duration", "Obtains onset but not the course over time", "Obtains onset and course with minor gaps", "Establishes onset, duration, frequency and progression precisely"]),
    ("Organization", "gather_information", [], ["Questions are scattered with no logical order", "Frequent jumps between topics", "Some logical grouping of questions", "Questions follow a logical order with minor lapses", "Interview follows a clear, logical structure from start to finish"]),
    ("Transitional statements", "gather_information", [], ["Changes topic abruptly without explanation", "Rarely signals topic changes", "Uses transitions for some sections", "Uses transitions for most sections", "Consistently explains why the next topic matters before moving to it"]),
    ("Pacing of the interview", "build_relationship", [], ["Rushed or with long unexplained silences", "Pace is often uncomfortable for the patient", "Pace is adequate but uneven", "Pace is comfortable with occasional lapses", "Pace is comfortable throughout and adapts to the patient"]),
    ("Type of questions", "gather_information", [], ["Uses mostly leading or multiple questions", "Relies on closed questions where open ones are needed", "Mixes open and closed questions without a plan", "Begins topics with open questions and follows with closed ones", "Uses open questions to begin each topic and focused questions to clarify, with no leading questions"]),
    ("Summarizing", "gather_information", [], ["Never summarizes", "Summarizes once, inaccurately", "Summarizes at the end only", "Summarizes at least one section accurately", "Summarizes each major section and invites correction"]),
    ("Duplication of questions", "gather_information", [], ["Repeats many questions for information already given", "Repeats several questions", "Repeats a few questions", "Rarely repeats questions", "Never repeats a question unless clarifying or summarizing"]),
    ("Lack of jargon", "share_information", [], ["Uses technical terms the patient cannot follow", "Frequent jargon, rarely explained", "Some jargon, usually explained when asked", "Rare jargon, explained unprompted", "Uses plain language throughout"]),
    ("Verification of patient information", "gather_information", [], ["Never checks unclear or conflicting details", "Checks one detail", "Checks some details", "Checks most unclear details", "Clarifies and verifies all unclear or conflicting details"]),
    ("Use of additional resources", "share_information", [], ["Does not address resources the patient needs", "Mentions resources without detail", "Suggests one relevant resource", "Suggests relevant resources with some detail", "Identifies and explains relevant resources and how to reach them"]),
    ("Patient's perspective", "understand_perspective", [], ["Does not ask about the patient's ideas or concerns", "Asks about ideas or concerns superficially", "Asks about the patient's ideas or concerns", "Explores the patient's ideas, concerns and expectations", "Explores ideas, concerns and expectations and uses them in the interview"]),
    ("Impact of illness on patient and family", "understand_perspective", [], ["Does not ask about impact", "Asks about impact briefly", "Asks about impact on daily life", "Explores impact on daily life and family", "Explores impact on work, daily life and family and responds to it"]),
    ("Impact of illness on self-image", "understand_perspective", ["counseling"], ["Does not address self-image", "Touches on self-image briefly", "Asks about self-image", "Explores self-image with some follow-up", "Explores how the illness affects self-image and responds with support"]),
    ("Support systems", "understand_perspective", [], ["Does not ask about support", "Asks one question about support", "Asks who the patient lives with", "Asks about family and social support", "Explores family, social and professional support and any gaps"]),
    ("Patient education", "share_information", ["counseling"], ["Gives no information", "Gives information that is inaccurate or confusing", "Gives some accurate information", "Gives accurate information in plain language", "Gives accurate, tailored information and checks understanding"]),
    ("Assessing understanding", "share_information", ["counseling"], ["Never checks understanding", "Asks 'do you understand' only", "Checks understanding once", "Checks understanding at key points", "Uses teach-back to confirm understanding"]),
    ("Achieving a shared plan", "reach_agreement", ["management-plan"], ["No plan discussed", "Plan is imposed on the patient", "Plan is described with little patient input", "Plan is discussed with patient input", "Plan is negotiated and agreed with the patient"]),
    ("Motivation for behavior change", "reach_agreement", ["counseling"], ["Does not address behavior change", "Lectures the patient", "Mentions change without exploring readiness", "Explores readiness for change", "Explores readiness and builds the patient's own motivation for change"]),
    ("Encouragement of questions", "share_information", [], ["Does not invite questions", "Invites questions only as the interview ends abruptly", "Invites questions once", "Invites questions at least twice", "Invites questions throughout and answers them fully"]),
    ("Closure", "provide_closure", [], ["Ends the interview abruptly", "Ends with no explanation of next steps", "States next steps briefly", "Summarizes and states next steps", "Summarizes, states next steps and confirms the patient is ready to close"]),
    ("Empathy and acknowledging cues", "build_relationship", [], ["Ignores emotional cues", "Notices cues but does not respond", "Responds to some cues", "Responds to most cues with empathic statements", "Names and validates the patient's emotions and responds supportively"]),
    ("Verbal facilitation", "build_relationship", [], ["No facilitating responses", "Rare facilitation", "Some encouragement to continue", "Frequent encouragement to continue", "Consistently uses encouragement, reflection and silence to help the patient speak"]),
    ("Non-verbal facilitation", "build_relationship", ["in-person"], ["Distracting or closed body language", "Little eye contact", "Adequate eye contact and posture", "Good eye contact and open posture", "Eye contact, posture and expression support the patient throughout"]),
    ("Follow-up arrangements", "provide_closure", ["management-plan"], ["No follow-up mentioned", "Follow-up mentioned vaguely", "Follow-up stated without timing", "Follow-up stated with timing", "Follow-up timing and triggers to return agreed with the patient"]),
]


def main():
    assert len(ITEMS) == 28
    assert sum(1 for item in ITEMS if item[2]) == 7
    out = pathlib.Path(__file__).resolve().parents[2] / "data" / "rubrics"
    out.mkdir(parents=True, exist_ok=True)
    rubric = {"schema_version": 1, "rubric_id": "MIRS", "title": "Master Interview Rating Scale",
              "scale": {"min": 1, "max": 5}, "items": []}
    elements = {"rubric_id": "MIRS", "elements": {}}
    for i, (title, element, tags, anchors) in enumerate(ITEMS, 1):
        item_id = f"MIRS{i:02d}"
        rubric["items"].append({"id": item_id, "title": title, "applicability_tags": tags,
                                "anchors": {k + 1: a for k, a in enumerate(anchors)}})
        elements["elements"][item_id] = element
    with open(out / "mirs.yaml", "w") as f:
        f.write("# Anchor descriptors are paraphrased; edit freely.\n")
        yaml.safe_dump(rubric, f, sort_keys=False, width=110)
    with open(out / "mirs_kalamazoo.yaml", "w") as f:
        f.write("# Item -> Kalamazoo element. Items left out are excluded from element means.\n")
        yaml.safe_dump(elements, f, sort_keys=False)


if __name__ == "__main__":
    main()
