//! Vocabulary and utterance templates for the synthetic corpus.
//!
//! Slots: `{o}` object, `{o2}` second object, `{a}` character, `{prep}` in/on.
//! Templates addressed at the speaker use "me" instead of a name.

use crate::world::{EmoteKind, EntityId, GameAction, PropertyFlag, Verb, WorldGraph};

use super::observation::normalize_utterance;

pub(crate) const SETTINGS: &[(&str, &str)] = &[
    ("royal kitchen", "pots hang over a roaring hearth and the smell of bread fills the air"),
    ("castle armory", "racks of spears line the stone walls beside a cold forge"),
    ("village tavern", "a noisy room of long tables, spilled ale and a crackling fire"),
    ("abandoned chapel", "broken pews face an altar covered in dust and candle wax"),
    ("forest clearing", "tall pines surround a patch of soft grass and wildflowers"),
    ("harbor dock", "gulls circle above wet planks and coils of salty rope"),
    ("throne room", "a red carpet leads to a golden throne under tall banners"),
    ("wizard tower", "shelves of strange jars and scrolls spiral up the tower walls"),
    ("market square", "merchants shout over stalls heaped with goods from far lands"),
    ("dungeon cell", "damp straw covers the floor of this dark and narrow cell"),
    ("mountain cave", "water drips from the ceiling of a cave lit by glowing moss"),
    ("stable yard", "horses stamp in their stalls and hay is piled in the corners"),
    ("library hall", "dusty books tower over reading desks lit by oil lamps"),
    ("farm cottage", "a small warm home with a herb garden and a sleepy cat"),
    ("guard barracks", "rows of bunks and a table scarred by knives and dice"),
    ("swamp hut", "a crooked hut on stilts above the murky green water"),
];

pub(crate) const CHARACTERS: &[&str] = &[
    "guard", "knight", "merchant", "priest", "blacksmith", "farmer", "witch", "bard",
    "queen", "king", "hunter", "fisherman", "monk", "thief", "baker", "servant",
    "soldier", "wizard", "innkeeper", "shepherd", "princess", "squire", "healer", "jester",
];

pub(crate) const PERSONA_TRAITS: &[&str] = &[
    "i have served this land for many years and i am proud of it",
    "i love a good story and a warm meal",
    "i trust no one and keep my belongings close",
    "i dream of travelling beyond the mountains one day",
    "my family depends on the coin i earn",
    "i am loyal to the crown above all else",
    "i spend my nights studying old secrets",
    "i am quick to laugh and slow to anger",
    "i lost everything in the great fire",
    "i am searching for a lost friend",
    "i fear the dark but hide it well",
    "people say i am the strongest in the village",
];

/// Noun and the property flags every object of that kind carries.
pub(crate) const OBJECT_KINDS: &[(&str, &[PropertyFlag])] = {
    use PropertyFlag::*;
    &[
        ("apple", &[Gettable, Food]),
        ("bread", &[Gettable, Food]),
        ("cheese", &[Gettable, Food]),
        ("fish", &[Gettable, Food]),
        ("pie", &[Gettable, Food]),
        ("wine", &[Gettable, Drink]),
        ("ale", &[Gettable, Drink]),
        ("potion", &[Gettable, Drink]),
        ("milk", &[Gettable, Drink]),
        ("cloak", &[Gettable, Wearable]),
        ("hat", &[Gettable, Wearable]),
        ("robe", &[Gettable, Wearable]),
        ("boots", &[Gettable, Wearable]),
        ("helmet", &[Gettable, Wearable]),
        ("ring", &[Gettable, Wearable]),
        ("sword", &[Gettable, Weapon]),
        ("dagger", &[Gettable, Weapon]),
        ("axe", &[Gettable, Weapon]),
        ("spear", &[Gettable, Weapon]),
        ("club", &[Gettable, Weapon]),
        ("coin", &[Gettable]),
        ("candle", &[Gettable]),
        ("book", &[Gettable]),
        ("rope", &[Gettable]),
        ("key", &[Gettable]),
        ("flower", &[Gettable]),
        ("sack", &[Gettable, Container]),
        ("basket", &[Gettable, Container]),
        ("chest", &[Container]),
        ("barrel", &[Container]),
        ("table", &[Surface]),
        ("shelf", &[Surface]),
    ]
};

pub(crate) const ADJECTIVES: &[&str] = &[
    "old", "rusty", "shiny", "small", "heavy", "wooden", "golden", "dusty", "red", "fine",
];

fn game_templates(verb: Verb, at_speaker: bool) -> &'static [&'static str] {
    match (verb, at_speaker) {
        (Verb::Get, _) => &["take a look at the {o}", "could you pick up the {o}", "grab that {o}"],
        (Verb::Drop, _) => &["put the {o} down", "drop the {o} right now"],
        (Verb::GetFrom, _) => &["take the {o} out of the {o2}", "fetch the {o} from the {o2}"],
        (Verb::PutIn, _) => &["put the {o} {prep} the {o2}", "store the {o} {prep} the {o2}"],
        (Verb::Give, true) => &["give me the {o}", "could you hand me the {o}"],
        (Verb::Give, false) => &["give the {o} to the {a}", "hand the {o} over to the {a}"],
        (Verb::Steal, true) => &["steal the {o} from me if you can", "try to snatch my {o}"],
        (Verb::Steal, false) => &["snatch the {o} from the {a}", "steal the {o} from the {a}"],
        (Verb::Hit, true) => &["go on, hit me", "fight me right now"],
        (Verb::Hit, false) => &["teach the {a} a lesson", "go and hit the {a}"],
        (Verb::Hug, true) => &["give me a hug", "i could really use a hug"],
        (Verb::Hug, false) => &["give the {a} a hug", "the {a} could use a hug"],
        (Verb::Drink, _) => &["take a sip of the {o}", "try drinking the {o}"],
        (Verb::Eat, _) => &["have a bite of the {o}", "try eating the {o}"],
        (Verb::Wear, _) => &["put on the {o}", "try wearing the {o}"],
        (Verb::Wield, _) => &["ready your {o}", "wield the {o} for battle"],
        (Verb::Remove, _) => &["take off the {o}", "remove your {o}"],
        (Verb::Emote, _) => &[],
    }
}

pub(crate) fn emote_templates(e: EmoteKind) -> &'static [&'static str] {
    use EmoteKind::*;
    match e {
        Laugh => &["tell me your funniest joke", "have you heard the one about the goat"],
        Smile => &["it is good to see a friendly face", "you brighten up this place"],
        Ponder => &["what do you make of this riddle", "what is the meaning of it all"],
        Frown => &["i am afraid i have bad news", "the harvest has failed again"],
        Nod => &["do you agree with me", "we should stick together, yes"],
        Sigh => &["another long day of work ahead", "the rain will never stop"],
        Grin => &["i have a wicked plan", "let us play a prank on the cook"],
        Gasp => &["did you see that ghost", "the bridge just collapsed"],
        Shrug => &["do you know where the captain went", "who left the gate open"],
        Stare => &["look into my eyes", "watch my hands very closely"],
        Scream => &["there is a spider on your back", "a rat just ran over your foot"],
        Cry => &["your old friend has passed away", "the village burned last night"],
        Growl => &["i insult your family", "your mother was a goblin"],
        Blush => &["you are the most beautiful person here", "everyone admires your grace"],
        Dance => &["the bards are playing a merry tune", "let us celebrate the festival"],
        Applaud => &["i just finished my greatest performance", "i won the tournament today"],
        Wave => &["i must be going now", "farewell, until we meet again"],
        Groan => &["i will tell you another long story", "we have to clean the whole hall"],
        Nudge => &["psst, over here", "hey, pay attention"],
        Wink => &["can you keep a secret", "nobody needs to know about this"],
        Yawn => &["it is very late in the night", "this lecture is so dull"],
        Pout => &["you cannot have any dessert", "you are not invited to the feast"],
    }
}

pub(crate) const PLAYER_FILLER: &[&str] = &[
    "what brings you to the {setting}",
    "the weather has been strange lately",
    "have you heard the news from the capital",
    "i have not slept well in days",
    "this {setting} gives me the chills",
    "how long have you been a {partner}",
    "i wonder what lies beyond the hills",
    "my feet ache from the long road",
    "do you come here often",
    "they say a dragon was seen in the north",
    "i am a {self}, pleased to meet you",
    "it is quieter here than i expected",
    "the road here was full of mud",
    "tell me about yourself",
];

pub(crate) const ENV_FILLER: &[&str] = &[
    "i suppose so",
    "that is an interesting thought",
    "i have heard stranger things",
    "yes, it has been a long season",
    "i would rather not talk about that",
    "it is good to have company",
    "hmm, let me think about that",
    "you ask a lot of questions",
    "times are hard for everyone",
    "indeed, indeed",
];

pub(crate) const ENV_REFUSE: &[&str] = &["not right now", "i would rather not"];
pub(crate) const ENV_CANNOT: &[&str] = &["i cannot do that right now", "i do not have that"];

pub(crate) fn env_ack(a: &GameAction) -> &'static [&'static str] {
    match a.verb() {
        Verb::Get => &["alright, i will pick it up", "let me have a look"],
        Verb::Drop => &["fine, i am putting it down"],
        Verb::GetFrom => &["let me fish it out"],
        Verb::PutIn => &["i will put it there"],
        Verb::Give => &["here, take it", "very well, it is yours"],
        Verb::Steal => &["mine now"],
        Verb::Hit => &["you asked for it"],
        Verb::Hug => &["come here, friend"],
        Verb::Drink => &["cheers to that"],
        Verb::Eat => &["this tastes wonderful"],
        Verb::Wear => &["how do i look"],
        Verb::Wield => &["i am ready to fight"],
        Verb::Remove => &["that feels better"],
        Verb::Emote => &["oh my", "well, well", "you do not say"],
    }
}

fn lower_name(w: &WorldGraph, id: EntityId) -> String {
    w.name(id).unwrap_or("someone").to_lowercase()
}

/// Every trigger utterance for `a`, spoken by `speaker`.
pub fn trigger_utterances(a: &GameAction, w: &WorldGraph, speaker: EntityId) -> Vec<String> {
    if let Some(e) = a.emote() {
        return emote_templates(e).iter().map(|s| s.to_string()).collect();
    }
    let args = a.args();
    let agent = match a {
        GameAction::Give(_, c) | GameAction::Steal(_, c) => Some(*c),
        GameAction::Hit(c) | GameAction::Hug(c) => Some(*c),
        _ => None,
    };
    let at_speaker = agent == Some(speaker);
    let (o, o2) = match a {
        GameAction::GetFrom(x, y) | GameAction::PutIn(x, y) => (Some(*x), Some(*y)),
        GameAction::Hit(_) | GameAction::Hug(_) => (None, None),
        _ => (args.first().copied(), None),
    };
    let prep = o2
        .and_then(|id| w.entity(id))
        .map(|e| if e.has(PropertyFlag::Container) { "in" } else { "on" })
        .unwrap_or("in");
    game_templates(a.verb(), at_speaker)
        .iter()
        .map(|t| {
            let mut s = t.to_string();
            if let Some(o) = o {
                s = s.replace("{o}", &lower_name(w, o));
            }
            if let Some(o2) = o2 {
                s = s.replace("{o2}", &lower_name(w, o2));
            }
            if let Some(c) = agent {
                s = s.replace("{a}", &lower_name(w, c));
            }
            s.replace("{prep}", prep)
        })
        .collect()
}

fn glob_match(template: &str, text: &str) -> bool {
    let mut pieces: Vec<&str> = Vec::new();
    let mut rest = template;
    while let Some(start) = rest.find('{') {
        pieces.push(&rest[..start]);
        let end = rest[start..].find('}').map(|e| start + e + 1).unwrap_or(rest.len());
        rest = &rest[end..];
    }
    pieces.push(rest);
    if pieces.len() == 1 {
        return template == text;
    }
    let (first, last) = (pieces[0], pieces[pieces.len() - 1]);
    if !text.starts_with(first) || !text.ends_with(last) || text.len() < first.len() + last.len() {
        return false;
    }
    let mut pos = first.len();
    let end = text.len() - last.len();
    for mid in &pieces[1..pieces.len() - 1] {
        // Each slot binds at least one character.
        let Some(window) = text.get(pos + 1..end.max(pos + 1)) else { return false };
        match window.find(mid) {
            Some(i) => pos = pos + 1 + i + mid.len(),
            None => return false,
        }
    }
    pos < end
}

/// Emote whose trigger `utterance` is.
pub fn trigger_emote(utterance: &str) -> Option<EmoteKind> {
    let u = normalize_utterance(utterance);
    EmoteKind::ALL
        .into_iter()
        .find(|&e| emote_templates(e).iter().any(|t| *t == u))
}

/// Game verb whose trigger template `utterance` instantiates.
pub fn trigger_verb(utterance: &str) -> Option<Verb> {
    let u = normalize_utterance(utterance);
    for verb in crate::world::Verb::GAME_VERBS {
        for at_speaker in [false, true] {
            if game_templates(verb, at_speaker).iter().any(|t| glob_match(t, &u)) {
                return Some(verb);
            }
        }
    }
    None
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn glob_binds_nonempty_slots() {
        assert!(glob_match("take a look at the {o}", "take a look at the rusty sword"));
        assert!(!glob_match("take a look at the {o}", "take a look at the "));
        assert!(glob_match("put the {o} {prep} the {o2}", "put the coin in the chest"));
        assert!(!glob_match("put the {o} {prep} the {o2}", "put the coin down"));
        assert!(glob_match("put the {o} down", "put the coin down"));
        assert!(glob_match("go on, hit me", "go on, hit me"));
    }

    #[test]
    fn families_are_recognised() {
        assert_eq!(trigger_verb("take a look at the old cloak"), Some(Verb::Get));
        assert_eq!(trigger_verb("take off the old cloak"), Some(Verb::Remove));
        assert_eq!(trigger_verb("give me a hug"), Some(Verb::Hug));
        assert_eq!(trigger_verb("give me the apple"), Some(Verb::Give));
        assert_eq!(trigger_verb("tell me about yourself"), None);
        assert_eq!(trigger_emote("psst, over here"), Some(EmoteKind::Nudge));
    }

    #[test]
    fn every_emote_has_distinct_triggers() {
        let mut all: Vec<&str> = EmoteKind::ALL.iter().flat_map(|&e| emote_templates(e).iter().copied()).collect();
        let n = all.len();
        all.sort();
        all.dedup();
        assert_eq!(all.len(), n);
    }
}
