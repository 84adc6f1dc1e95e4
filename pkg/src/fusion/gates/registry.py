# Maps policy modes to the gate class that confirms or vetoes silence timeouts.
# Adding a policy means adding one line here.

POLICY_GATES = {
    "v1": "fusion.gates.acoustic.AcousticGate",
    "v2": "fusion.gates.language_model.LanguageModelGate",
    "v3": "fusion.gates.lookahead.LookaheadGate",
}
