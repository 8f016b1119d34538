"""Interaction prompt templates and feedback dispatch.

The template strings are fixed and golden-tested so rendered prompt text
is reproducible byte-for-byte. Image slots are replaced by the symbolic
frame rendering of the simulator.
"""

SYSTEM_PROMPT = (
    "You are a robot in given room. You need to complete the tasks according "
    "to human instructions. We provide an Available_Actions set and the "
    "corresponding explanations for each action. Each step, you should select "
    "one action from Available_Actions."
)

AVAILABLE_ACTIONS_BLOCK = """Available_Actions: {{
"navigate to <object>": Move to the object.
"pickup <object>": Pick up the object.
"put in <object>": Put the item in your hand into or on the object.
"toggle <object>": Switch the object on or off.
"open <object>": Open the object (container), and you will see inside the object.
"close <object>": Close the object.
"observe": You can obtain image of your directly rear, left, and right perspectives.
"move forward": Move forward to see more clearly.
"end": If you think you have completed the task, please output "end".}}"""

INITIALIZATION_PROMPT = (
    "{frame}This is an image from your frontal perspective. Please select an "
    "action from the Available_Actions and fill in the arguments.\n"
    "Task: {taskname}\n"
    + AVAILABLE_ACTIONS_BLOCK
    + "\n"
    "Before making each decision, you can think, plan, and even reflect step "
    "by step, and then output your final action.\n"
    "Your final action must strictly follow format: <DecisionMaking>Your "
    "Action</DecisionMaking>, for example, "
    "<DecisionMaking>observe</DecisionMaking>."
)

INTERACTION_PROMPT = (
    "After executing your previous {action} , you get this new image above.\n"
    "{frame}\n"
    "To complete your task, you can think step by step at first and then "
    "output your new action from the Available_Actions.\n"
    "Your action must strictly follow format: <DecisionMaking>Your "
    "Action</DecisionMaking>, for example, "
    "<DecisionMaking>observe</DecisionMaking>."
)

FEEDBACK_PROMPT_1 = (
    "<|feedback|>Action: {action} is illegal, {object} is the most relevant "
    "item in this room and {action}. Object: {object} is not currently "
    "navigable, you can try \"navigate to <object>\" to reach nearby, larger "
    "objects for closer observation."
)

FEEDBACK_PROMPT_2 = (
    "<|feedback|>Action: {object} is illegal, Object: {object} is currently "
    "unavailable for interaction. Possible situations include: {object} does "
    "not exist in your current view; you are too far away from {object}; the "
    "{object} cannot perform operation {action}.\n"
    "You can try \"move forward\" to approach the target object or \"navigate "
    "to <object>\" to reach nearby, larger objects for closer inspection."
)

FEEDBACK_PROMPT_3 = (
    "<|feedback|>Action: {action} is illegal, the name of the navigated "
    "object doesn't quite match the obejct in the image, please try "
    "navigating to another object first."
)

FEEDBACK_PROMPT_4 = (
    "<|feedback|>Action: {action} is illegal, the name of the object doesn't "
    "quite match the obejct in the image, Please try interacting with another "
    "object or navigating to another object."
)

FORMAT_REMINDER = (
    "Your reply did not contain a valid action. Your final action must "
    "strictly follow format: <DecisionMaking>Your Action</DecisionMaking>, "
    "for example, <DecisionMaking>observe</DecisionMaking>."
)

# Simulator error code -> feedback template number. Navigability failures
# use template 1, distance/attribute/visibility/state failures template 2,
# unknown navigation names template 3, unknown interaction names template 4.
FEEDBACK_DISPATCH = {
    "TargetNotNavigable": 1,
    "TargetUnavailable": 2,
    "HandsFull": 2,
    "HandsEmpty": 2,
    "AlreadyOpen": 2,
    "AlreadyClosed": 2,
    "ContainerClosed": 2,
    "EpisodeEnded": 2,
    "UnknownNavigationTarget": 3,
    "UnknownInteractionTarget": 4,
}

_TEMPLATES = {
    1: FEEDBACK_PROMPT_1,
    2: FEEDBACK_PROMPT_2,
    3: FEEDBACK_PROMPT_3,
    4: FEEDBACK_PROMPT_4,
}


def render_feedback(error_code, action, scene=None):
    template = _TEMPLATES[FEEDBACK_DISPATCH[error_code]]
    action_text = action.render(scene)
    target = action.target or action_text
    if scene is not None and action.target in scene:
        target = scene.obj(action.target).class_name
    return template.format(action=action_text, object=target)


def render_initialization(frame_text, taskname):
    return INITIALIZATION_PROMPT.format(frame=frame_text, taskname=taskname)


def render_interaction(action_text, frame_text):
    return INTERACTION_PROMPT.format(action=action_text, frame=frame_text)
