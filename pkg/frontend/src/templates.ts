// Feedback hint chips: prefill the input with a template the human edits.
// The shapes mirror what the simulated user would say, so the agent parses
// them identically.

export interface HintChip {
  label: string;
  template: string;
}

export const HINT_CHIPS: HintChip[] = [
  { label: "corrective", template: "No, that is NAME." },
  { label: "descriptive", template: "No. It is a COLOR CLASS." },
  { label: "landmark", template: "No. It is near the LANDMARK." },
  { label: "procedural", template: "No. turn left, go forward 2 meters." },
  { label: "yes/no", template: "No, keep searching." },
  { label: "confirm", template: "Yes, that's it. Well done." },
];
