#!/usr/bin/env python3
"""Regenerate the replay fixtures under crates/core/fixtures/.

The consultation engine consumes replay entries positionally per agent id:
formation (attending), then per round each unconverged specialist's opinion
followed by one reply from every other still-active team member in team
order, then the summary and the final decision (attending). The scripts here
encode a single round in which every specialist agrees immediately.
"""

import json
import os

ROOT = os.path.join(os.path.dirname(__file__), "..", "crates", "core", "fixtures")


def entry(agent, response, match_key=""):
    return {"agent_id": agent, "match_key": match_key, "response": response}


def write_jsonl(path, rows):
    os.makedirs(os.path.dirname(path), exist_ok=True)
    with open(path, "w") as f:
        for row in rows:
            f.write(json.dumps(row, ensure_ascii=False) + "\n")


def write_text(path, text):
    os.makedirs(os.path.dirname(path), exist_ok=True)
    with open(path, "w") as f:
        f.write(text)


def consensus_script(formation_reply, opinions, summary, final):
    """Replay entries for one all-agree round. `opinions` maps team order."""
    rows = [entry("attending", formation_reply)]
    team = [dept for dept, _ in opinions]
    for i, (dept, text) in enumerate(opinions):
        rows.append(entry(dept, text))
        for responder in team[i + 1 :]:
            rows.append(entry(responder, "AGREE"))
    rows.append(entry("attending", summary))
    rows.append(entry("attending", final))
    return rows


# --- case 1: differential diagnosis ---------------------------------------

CASE1_SYMPTOMS = [
    ("HP:0000019", "Urinary hesitancy"),
    ("HP:0000020", "Urinary incontinence"),
    ("HP:0012653", "Prostatitis"),
    ("HP:0001279", "Syncope"),
    ("HP:0001324", "Muscle weakness"),
    ("HP:0003236", "Elevated circulating creatine kinase concentration"),
    ("HP:0003546", "Exercise intolerance"),
    ("HP:0007185", "Loss of consciousness"),
    ("HP:0010741", "Pedal edema"),
    ("HP:0012251", "ST segment elevation"),
    ("HP:0030972", "Increased circulating creatine kinase MB isoform"),
    ("HP:0100518", "Dysuria"),
    ("HP:0100576", "Amaurosis fugax"),
]

CASE1_TEAM = [
    "Urology", "Cardiology", "Neurology", "Pathology", "Nuclear Medicine",
    "Radiology", "Interventional Radiology", "Ophthalmology",
    "Rehabilitation Medicine", "Pharmacy", "Vascular Surgery",
    "Ultrasound Medicine", "Anesthesiology", "Cardiac Surgery",
    "Laboratory Medicine",
]

CASE1_FORMATION = (
    "Based on the patient's symptoms, I would like to request the following "
    "specialists to form a multi-disciplinary team: " + ", ".join(CASE1_TEAM) + "."
)

CASE1_TRANSCRIBED_OPINIONS = {
    "Cardiology": (
        "Based on the patient's symptoms, medical history, and test results, I would "
        "recommend the following diagnosis and treatment plan: 1. **Acute Myocardial "
        "Infarction (AMI) with Rhabdomyolysis**: The patient's symptoms of chest pain, "
        "shortness of breath, and elevated troponin levels are consistent with an acute "
        "myocardial infarction. The presence of rhabdomyolysis, as indicated by elevated "
        "creatine kinase levels, suggests muscle damage. 2. **Myasthenia Gravis with "
        "Cardiac Involvement**: The patient's symptoms of muscle weakness, fatigue, and "
        "difficulty swallowing, along with the presence of anti-acetylcholine receptor "
        "antibodies, suggest myasthenia gravis."
    ),
    "Neurology": (
        "Based on the diagnostic tools' results, the most likely diagnosis is Brugada "
        "Syndrome 4, which is a genetic disorder that affects the heart's electrical "
        "system and can cause abnormal heart rhythms, including ventricular fibrillation. "
        "The patient's symptoms, such as syncope, muscle weakness, and elevated circulating "
        "creatine kinase concentration, are consistent with this diagnosis. However, other "
        "possible diagnoses such as multiple sclerosis, muscular dystrophy, and myasthenia "
        "gravis should be considered in the differential diagnosis."
    ),
    "Pathology": (
        "Based on the patient's symptoms, I would recommend the following diagnosis: "
        "1. **Acute Myocardial Infarction (AMI) with Rhabdomyolysis**: The patient's "
        "symptoms of ST segment elevation, elevated circulating creatine kinase "
        "concentration, and increased circulating creatine kinase MB isoform suggest an "
        "acute myocardial infarction. 2. **Myasthenia Gravis with Cardiac Involvement**: "
        "muscle weakness, exercise intolerance, and syncope could indicate myasthenia gravis."
    ),
    "Urology": (
        "Based on the diagnostic tools' results, the most likely diagnosis is Brugada "
        "Syndrome 4. The patient's symptoms, such as syncope, muscle weakness, and ST "
        "segment elevation, are consistent with this diagnosis. The urinary symptoms "
        "warrant evaluation but are better explained by a systemic disorder than a "
        "primary urologic one. Additional testing, such as genetic testing and "
        "electrophysiological studies, is necessary to confirm the diagnosis."
    ),
}


def case1_generic_opinion(dept):
    return (
        f"From the {dept} perspective, the combination of syncope, ST segment "
        "elevation, and elevated creatine kinase points toward an inherited "
        "arrhythmia syndrome with muscular involvement. I support evaluating for "
        "Brugada Syndrome 4 while keeping metabolic myopathies in the differential."
    )


CASE1_SUMMARY = (
    "The multi-disciplinary team reviewed the case. Cardiology and Pathology "
    "raised acute myocardial infarction with rhabdomyolysis, while Neurology and "
    "Urology, supported by the diagnostic tools, favored Brugada Syndrome 4. The "
    "team agreed the syncope, ST segment elevation, and creatine kinase findings "
    "are best explained by an inherited arrhythmia syndrome, with metabolic "
    "myopathies retained in the differential."
)

CASE1_FINAL = """Considering the above information, these are the top 10 diagnoses:
DIAGNOSIS:
1. Brugada Syndrome.
2. Muscular dystrophy-dystroglycanopathy (congenital with brain and eye anomalies), type A, 3
3. Multiple system atrophy; MSA/Multiple system atrophy/Multiple system atrophy 1, susceptibility to
4. Catecholaminergic polymorphic ventricular tachycardia, CPVT/Catecholaminergic polymorphic ventricular tachycardia/Ventricular tachycardia, catecholaminergic polymorphic, 1, with or without atrial dysfunction and/or dilated cardiomyopathy
5. NKX6-2-related autosomal recessive hypomyelinating leukodystrophy/Spastic ataxia 8, autosomal recessive, with hypomyelinating leukodystrophy
6. Muscular dystrophy, limb-girdle, autosomal recessive 25
7. Glycogen storage disease II
8. Danon disease
9. Polyglucosan body myopathy 1 with or without immunodeficiency
10. Myopathy, myofibrillar, 7"""

CASE1_PHENOMIZER = [
    ("BLADDER DIVERTICULUM", 0.0160),
    ("MULTIPLE SCLEROSIS, SUSCEPTIBILITY TO", 0.0374),
    ("MUSCLE GLYCOGENOSIS, X-LINKED", 0.0374),
    ("CEREBRAL ARTERIOPATHY, AUTOSOMAL DOMINANT, WITH SUBCORTICAL INFARCTS AND LEUKOENCEPHALOPATHY; CADASIL; DEMENTIA, HEREDITARY MULTI-INFARCT TYPE; CASIL", 0.0881),
    ("MYOPATHY, VACUOLAR, WITH CASQ1 AGGREGATES; VMCQA", 0.0881),
    ("MUSCULAR DYSTROPHY-DYSTROGLYCANOPATHY (LIMB-GIRDLE), TYPE C, 12; MDDGC12; MUSCULAR DYSTROPHY-DYSTROGLYCANOPATHY, LIMB-GIRDLE, POMK-RELATED", 0.0881),
    ("BRUGADA SYNDROME 4; BRGDA4", 0.1207),
    ("SHORT QT SYNDROME 1; SQT1", 0.1207),
    ("JERVELL AND LANGE-NIELSEN SYNDROME 2; JLNS2", 0.1207),
    ("MUSCULAR DYSTROPHY, CARDIAC TYPE", 0.1207),
]

CASE1_LIRICAL = [
    ("Glycogen storage disease II", 72.30),
    ("Danon disease", 0.00),
    ("Polyglucosan body myopathy 1 with or without immunodeficiency", 0.00),
    ("Myopathy, myofibrillar, 7", 0.00),
    ("Muscular dystrophy, limb-girdle, autosomal recessive 25", 0.00),
    ("Neuronal intranuclear inclusion disease", 0.00),
    ("Progressive external ophthalmoplegia with mitochondrial DNA deletions, autosomal recessive 5", 0.00),
    ("Progressive external ophthalmoplegia with mitochondrial DNA deletions, autosomal dominant 4", 0.00),
    ("Lipodystrophy, congenital generalized, type 4", 0.00),
    ("Mitochondrial DNA depletion syndrome 11", 0.00),
]

CASE1_PHENOBRAIN = [
    ("Cerebral autosomal dominant angiopathy with subcortical infarcts and leukoencephalopathy", 0.9998560115190785),
    ("Malakoplakia", 0.9992800575953923),
    ("Medium chain acyl-CoA dehydrogenase deficiency", 0.9992080633549316),
    ("Eisenmenger syndrome", 0.9991360691144708),
    ("Pure autonomic failure", 0.99906407487401),
    ("Porphyria/Porphyria", 0.9987041036717063),
    ("Adrenoleukodystrophy", 0.9985601151907847),
    ("Multiple sclerosis, susceptibility to", 0.9983441324694025),
    ("Acute intermittent porphyria/Porphyria, acute intermittent", 0.9983081353491721),
]

CASE1_MEMORY = [
    ("mem-1", [
        ("HP:0000211", "Trismus"), ("HP:0000975", "Hyperhidrosis"),
        ("HP:0001279", "Syncope"), ("HP:0002013", "Vomiting"),
        ("HP:0007185", "Loss of consciousness"),
        ("HP:0011712", "Right bundle branch block"),
        ("HP:0012251", "ST segment elevation"),
    ], ["Brugada syndrome"]),
    ("mem-2", [
        ("HP:0000012", "Urinary urgency"), ("HP:0000019", "Urinary hesitancy"),
        ("HP:0000020", "Urinary incontinence"), ("HP:0001279", "Syncope"),
        ("HP:0001297", "Stroke"), ("HP:0001350", "Slurred speech"),
        ("HP:0002019", "Constipation"), ("HP:0002059", "Cerebral atrophy"),
        ("HP:0002075", "Dysdiadochokinesis"),
        ("HP:0002143", "Abnormal spinal cord morphology"),
        ("HP:0002403", "Positive Romberg sign"),
        ("HP:0002500", "Abnormal cerebral white matter morphology"),
        ("HP:0002516", "Increased intracranial pressure"),
        ("HP:0002637", "Cerebral ischemia"),
        ("HP:0002922", "Increased CSF protein concentration"),
        ("HP:0003445", "EMG: neuropathic changes"),
        ("HP:0003487", "Babinski sign"),
        ("HP:0003551", "Difficulty climbing stairs"),
        ("HP:0007185", "Loss of consciousness"),
        ("HP:0007340", "Lower limb muscle weakness"),
        ("HP:0008775", "Abnormal prostate morphology"),
        ("HP:0010535", "Sleep apnea"), ("HP:0012229", "CSF pleocytosis"),
        ("HP:0012534", "Dysesthesia"), ("HP:0030975", "Abasia"),
        ("HP:0012874", "Abnormal male reproductive system physiology"),
        ("HP:0100008", "Schwannoma"), ("HP:0100515", "Pollakisuria"),
        ("HP:0100518", "Dysuria"), ("HP:0100526", "Neoplasm of the lung"),
        ("HP:0100639", "Erectile dysfunction"),
        ("HP:0100712", "Abnormal lumbar spine morphology"),
    ], ["Multiple system atrophy"]),
    ("mem-3", [
        ("HP:0001279", "Syncope"), ("HP:0001962", "Palpitations"),
        ("HP:0012251", "ST segment elevation"),
    ], ["Brugada Syndrome"]),
    ("mem-4", [
        ("HP:0001279", "Syncope"), ("HP:0001638", "Cardiomyopathy"),
        ("HP:0001663", "Ventricular fibrillation"),
        ("HP:0001695", "Cardiac arrest"),
        ("HP:0011712", "Right bundle branch block"),
        ("HP:0012819", "Myocarditis"),
    ], ["Catecholaminergic polymorphic ventricular tachycardia"]),
    ("mem-5", [
        ("HP:0001663", "Ventricular fibrillation"), ("HP:0002090", "Pneumonia"),
        ("HP:0002094", "Dyspnea"), ("HP:0003546", "Exercise intolerance"),
        ("HP:0006562", "Viral hepatitis"), ("HP:0012251", "ST segment elevation"),
        ("HP:0012735", "Cough"),
    ], ["Brugada syndrome"]),
]


def gen_case1():
    base = os.path.join(ROOT, "case1")
    case = {
        "case_id": "case-1",
        "symptoms": [{"id": i, "label": l} for i, l in CASE1_SYMPTOMS],
        "gold_diagnoses": ["Brugada Syndrome"],
    }
    write_text(os.path.join(base, "case.json"), json.dumps(case, ensure_ascii=False, indent=2) + "\n")

    opinions = []
    for dept in CASE1_TEAM:
        opinions.append((dept, CASE1_TRANSCRIBED_OPINIONS.get(dept, case1_generic_opinion(dept))))
    script = consensus_script(CASE1_FORMATION, opinions, CASE1_SUMMARY, CASE1_FINAL)
    write_jsonl(os.path.join(base, "script.jsonl"), script)

    input_key = "|".join(sorted(i for i, _ in CASE1_SYMPTOMS))
    tools = []
    tools.append({
        "tool": "Phenomizer", "input_key": input_key,
        "output": [{"disease": d, "score": s, "score_kind": "p_value"} for d, s in CASE1_PHENOMIZER],
    })
    tools.append({
        "tool": "LIRICAL", "input_key": input_key,
        "output": [{"disease": d, "score": s, "score_kind": "posterior"} for d, s in CASE1_LIRICAL],
    })
    tools.append({
        "tool": "Phenobrain", "input_key": input_key,
        "output": [{"disease": d, "score": s, "score_kind": "score"} for d, s in CASE1_PHENOBRAIN],
    })
    write_jsonl(os.path.join(base, "tools.jsonl"), tools)

    memory_rows = [{"dimension": 256}]
    for record_id, symptoms, diagnoses in CASE1_MEMORY:
        memory_rows.append({
            "record_id": record_id,
            "kind": "diagnosis_case",
            "profile_snapshot": {
                "case_id": record_id,
                "symptoms": [{"id": i, "label": l} for i, l in symptoms],
                "gold_diagnoses": diagnoses,
            },
            "decision": {"task": "diagnosis", "ranked": diagnoses},
            "source": "seed_corpus",
        })
    write_jsonl(os.path.join(base, "memory.jsonl"), memory_rows)


# --- case 2: medication recommendation -------------------------------------

CASE2_GOLD = [
    "0.9% Sodium Chloride", "5% Dextrose", "Calcium Carbonate",
    "Desmopressin Nasal", "DiphenhydrAMINE", "Heparin", "Isoniazid",
    "LeVETiracetam", "Lisinopril", "Lorazepam", "Methotrexate", "Ondansetron",
    "OxycoDONE (Immediate Release)", "Potassium Chloride",
    "Potassium Chloride Replacement (Oncology)", "PredniSONE",
    "Prochlorperazine", "Propranolol", "Ranitidine", "Sertraline",
    "Sodium Bicarbonate", "traZODONE",
]

CASE2_CATALOG = CASE2_GOLD + [
    "Acetaminophen", "Dexamethasone", "Clonazepam", "Furosemide",
    "*NF* Epirubicin", "Mesna", "Levothyroxine Sodium", "Phenoxybenzamine HCl",
    "Metoprolol Tartrate", "PHENobarbital", "prednisolone", "fludrocortisone",
    "Potassium Acetate", "Dantrolene Sodium", "Melphalan",
    "interferon alfa-2b 6 million unit/mL", "Aldesleukin", "Magnesium Sulfate",
    "LamoTRIgine", "Diazepam", "Senna", "Famotidine", "Docusate Sodium",
    "Tolvaptan", "Penicillamine", "Pyridoxine",
]

CASE2_DISEASES = [
    "Encounter for antineoplastic chemotherapy",
    "Primary central nervous system lymphoma, unspecified site, extranodal and solid organ sites",
    "Other specified disorders of metabolism",
    "Diabetes insipidus",
    "Nonspecific reaction to tuberculin skin test without active tuberculosis",
    "Epilepsy, unspecified, without mention of intractable epilepsy",
    "Dysthymic disorder",
    "Arthropathy, unspecified, site unspecified",
    "Sleep disturbance, unspecified",
    "Personal history of other infectious and parasitic diseases",
    "Long-term (current) use of steroids",
]

CASE2_VISITS = [
    {
        "visit_index": 1,
        "diseases": [
            "Encounter for antineoplastic chemotherapy", "Diabetes insipidus",
            "Diffuse large B-cell lymphoma, extranodal and solid organ sites",
            "Calculus of kidney", "Personal history of nicotine dependence",
            "Anxiety disorder, unspecified", "Insomnia, unspecified",
            "Essential (primary) hypertension",
            "Presence of artificial hip joint, bilateral",
        ],
        "procedures": ["Introduction of Other Antineoplastic into Central Vein, Percutaneous Approach"],
        "medications": ["Magnesium Sulfate", "5% Dextrose", "Sodium Bicarbonate", "LamoTRIgine", "Methotrexate", "Heparin"],
    },
    {
        "visit_index": 2,
        "diseases": [
            "Primary central nervous system lymphoma, unspecified site, extranodal and solid organ sites",
            "Cerebral edema", "Diabetes insipidus", "Other convulsions",
            "Unspecified essential hypertension", "Hip joint replacement",
            "Personal history of tobacco use", "Personal history of tuberculosis",
        ],
        "procedures": ["Injection or infusion of cancer chemotherapeutic substance"],
        "medications": [
            "Sodium Bicarbonate", "0.9% Sodium Chloride", "Diazepam",
            "LeVETiracetam", "Heparin", "5% Dextrose", "Dexamethasone",
            "traZODONE", "Acetaminophen", "Methotrexate", "Propranolol",
            "Calcium Carbonate", "Senna", "Sertraline",
        ],
    },
    {
        "visit_index": 3,
        "diseases": [
            "Encounter for antineoplastic chemotherapy",
            "Other malignant lymphomas, unspecified site, extranodal and solid organ sites",
            "Diabetes insipidus", "Unspecified essential hypertension",
            "Hip joint replacement",
            "Epilepsy, unspecified, without mention of intractable epilepsy",
            "Anxiety state, unspecified", "Sleep disturbance, unspecified",
        ],
        "procedures": ["Injection or infusion of cancer chemotherapeutic substance"],
        "medications": [
            "traZODONE", "Famotidine", "Prochlorperazine", "Dexamethasone",
            "0.9% Sodium Chloride", "Sodium Bicarbonate", "Clonazepam", "Senna",
            "Ondansetron", "5% Dextrose", "Docusate Sodium", "LeVETiracetam",
            "Acetaminophen", "Desmopressin Nasal", "Lisinopril", "Methotrexate",
        ],
    },
]

CASE2_TEAM_REPLY = [
    "Nuclear Medicine", "Pathology", "Nephrology", "Urology", "Neurology",
    "Oncology", "Hematology", "Radiology", "Interventional Radiology",
    "Neurosurgery", "Infectious Diseases", "Rheumatology",
    "Rehabilitation Medicine", "Psychiatry", "Clinical Nutrition", "Pharmacy",
    "Orthopedic Surgery", "Hematology", "Dentistry", "Anesthesiology",
    "Endocrinology", "Laboratory Medicine", "Traditional Chinese Medicine",
    "Allergy and Immunology",
]

CASE2_FORMATION = (
    "Based on the patient's symptoms, I would like to request the following "
    "specialists to form a multi-disciplinary team: " + ", ".join(CASE2_TEAM_REPLY) + "."
)

CASE2_TRANSCRIBED_OPINIONS = {
    "Nuclear Medicine": (
        "Based on the patient's diagnosis and medical history, I will provide my expert "
        "opinion on the treatment. As the patient has been diagnosed with primary central "
        "nervous system lymphoma, methotrexate is a common chemotherapeutic agent used to "
        "treat this condition. As the patient has epilepsy, LeVETiracetam is an "
        "antiepileptic medication that can help control seizures. As the patient has "
        "diabetes insipidus, desmopressin nasal spray can help regulate fluid balance and "
        "reduce urine production. As the patient has dysthymic disorder, sertraline is an "
        "antidepressant medication that can help manage symptoms of depression."
    ),
    "Pathology": (
        "Based on the patient's diagnosis and medical history, the following medications "
        "are recommended: 1. **Methotrexate**: As the patient is undergoing antineoplastic "
        "chemotherapy, methotrexate is a common chemotherapeutic agent used to treat "
        "various types of cancer, including lymphoma. 2. **LeVETiracetam**: As the patient "
        "has epilepsy, LeVETiracetam is an antiepileptic medication that can help control "
        "seizures. 3. **Desmopressin Nasal**: As the patient has diabetes insipidus, "
        "desmopressin nasal spray can help regulate water balance in the body. "
        "4. **Sertraline**: As the patient has dysthymic disorder, sertraline is an "
        "antidepressant medication that can help manage symptoms of depression."
    ),
    "Nephrology": (
        "**Treatment Plan:** **Chemotherapy:** Continue with the current antineoplastic "
        "chemotherapy regimen as prescribed by the oncologist. **Diabetes Insipidus:** "
        "Desmopressin Nasal Spray: 1-2 sprays (10-20 mcg) intranasally at bedtime, as "
        "needed, to control nocturia and polyuria. **Epilepsy:** LeVETiracetam (Keppra): "
        "500-1000 mg orally twice daily, as needed, to control seizures. **Dysthymic "
        "Disorder:** Sertraline (Zoloft): 50-100 mg orally once daily, as needed, to "
        "manage depressive symptoms. **Pain Management:** Acetaminophen (Tylenol): "
        "650-1000 mg orally every 4-6 hours, as needed, for pain relief."
    ),
    "Urology": (
        "Based on the patient's diagnosis and medical history, I will provide a treatment "
        "plan that addresses the various conditions and medications. **Primary central "
        "nervous system lymphoma:** The patient is already receiving antineoplastic "
        "chemotherapy, which is the standard treatment. I recommend continuing the "
        "chemotherapy regimen as prescribed. **Diabetes insipidus:** I recommend "
        "Desmopressin Nasal to manage the symptoms of diabetes insipidus. **Nonspecific "
        "reaction to tuberculin skin test:** I recommend monitoring the patient for signs "
        "of tuberculosis and considering prophylactic treatment if necessary."
    ),
}


def case2_generic_opinion(dept):
    return (
        f"From the {dept} perspective, the regimen should continue methotrexate-based "
        "chemotherapy with antiemetic cover (Ondansetron), seizure control with "
        "LeVETiracetam, Desmopressin Nasal for diabetes insipidus, and Sertraline for "
        "the dysthymic disorder, alongside the supportive fluids and electrolytes used "
        "on prior admissions."
    )


CASE2_SUMMARY = (
    "The multi-disciplinary team reviewed the patient's fourth admission for "
    "antineoplastic chemotherapy with primary central nervous system lymphoma. "
    "There was consensus on continuing methotrexate with antiemetic support, "
    "LeVETiracetam for seizure control, Desmopressin Nasal for diabetes "
    "insipidus, and Sertraline for the dysthymic disorder, with supportive "
    "fluids, electrolytes, and prophylaxis aligned with the prior medication "
    "records."
)

CASE2_FINAL = """Considering the above information, I recommend the following combination of medications:
TREATMENT:
1. Ondansetron
2. Methotrexate
3. LeVETiracetam
4. Sertraline
5. Propranolol
6. Sodium Bicarbonate
7. 5% Dextrose
8. 0.9% Sodium Chloride
9. Heparin
10. Acetaminophen
11. OxycoDONE (Immediate Release)
12. traZODONE
13. Desmopressin Nasal
14. Lisinopril
15. Dexamethasone
16. Clonazepam
17. Furosemide
18. Potassium Chloride Replacement (Oncology)
19. Calcium Carbonate
20. Lorazepam
21. PredniSONE"""

CASE2_SINGLE_AGENT = """TREATMENT:
1. *NF* Epirubicin
2. Mesna
3. Levothyroxine Sodium
4. Desmopressin Nasal
5. Phenoxybenzamine HCl
6. Metoprolol Tartrate
7. Lorazepam
8. LeVETiracetam
9. phenobarbital
10. Sertraline
11. prednisolone
12. fludrocortisone
13. Potassium Chloride
14. Potassium Acetate
15. Sodium Bicarbonate
16. Ondansetron
17. Prochlorperazine
18. Dantrolene Sodium
19. Melphalan
20. interferon alfa-2b 6 million unit/mL
21. Aldesleukin"""

CASE2_DDI = [
    ("Prochlorperazine", "Potassium Chloride", "may cause Myringitis"),
    ("Sertraline", "Prochlorperazine", "may cause meibomianitis"),
    ("Mesna", "Metoprolol Tartrate", "may cause corticosteroid therapy"),
    ("Metoprolol Tartrate", "Potassium Chloride", "may cause corticosteroid therapy"),
    ("Sertraline", "fludrocortisone", "may cause meibomianitis"),
    ("Methotrexate", "Ranitidine", "may reduce methotrexate clearance"),
    ("Heparin", "Lisinopril", "may increase hyperkalemia risk"),
]

CASE2_MONOGRAPHS = [
    ("Ondansetron", "A competitive serotonin type 3 receptor antagonist. It is effective in the treatment of nausea and vomiting caused by cytotoxic chemotherapy drugs, including cisplatin, and has reported anxiolytic and neuroleptic properties."),
    ("Tolvaptan", "Tolvaptan is used to treat low blood sodium levels (hyponatremia) associated with various conditions like congestive heart failure, cirrhosis, and syndrome of inappropriate antidiuretic hormones."),
    ("Ranitidine", "A non-imidazole blocker of those histamine receptors that mediate gastric secretion (H2 receptors). It is used to treat gastrointestinal ulcers."),
    ("Penicillamine", "Penicillamine is a pharmaceutical of the chelator class. The pharmaceutical form is D-penicillamine, as L-penicillamine is toxic (it inhibits the action of pyridoxine). It is an alpha-amino acid metabolite of penicillin, although it has no antibiotic properties."),
    ("Pyridoxine", "Pyridoxine is the 4-methanol form of vitamin B6, an important water-soluble vitamin that is naturally present in many foods. Vitamin B6 and pyridoxine are essential nutrients required for normal functioning of many biological systems within the body."),
]


def gen_case2():
    base = os.path.join(ROOT, "case2")
    visit = {
        "patient_id": "case-2-patient",
        "visit_index": 4,
        "diseases": CASE2_DISEASES,
        "procedures": ["Injection or infusion of cancer chemotherapeutic substance"],
        "gold_medications": sorted(CASE2_GOLD),
    }
    write_text(os.path.join(base, "visit.json"), json.dumps(visit, ensure_ascii=False, indent=2) + "\n")
    write_text(os.path.join(base, "catalog.txt"), "\n".join(CASE2_CATALOG) + "\n")
    write_text(os.path.join(base, "single_agent_reply.txt"), CASE2_SINGLE_AGENT + "\n")

    ddi_lines = ["drug_a,drug_b,annotation"]
    for a, b, ann in CASE2_DDI:
        ddi_lines.append(f"{a},{b},{ann}")
    write_text(os.path.join(base, "ddi.csv"), "\n".join(ddi_lines) + "\n")

    write_jsonl(
        os.path.join(base, "monographs.jsonl"),
        [{"name": n, "description": d} for n, d in CASE2_MONOGRAPHS],
    )

    memory_rows = [{"dimension": 256}]
    for v in CASE2_VISITS:
        record_visit = {
            "patient_id": "case-2-patient",
            "visit_index": v["visit_index"],
            "diseases": v["diseases"],
            "procedures": v["procedures"],
            "gold_medications": sorted(v["medications"]),
        }
        memory_rows.append({
            "record_id": f"case-2-patient#{v['visit_index']}",
            "kind": "visit",
            "profile_snapshot": record_visit,
            "decision": {"task": "treatment", "medications": sorted(v["medications"])},
            "source": "seed_corpus",
        })
    write_jsonl(os.path.join(base, "memory.jsonl"), memory_rows)

    # duplicate department in the formation reply collapses: unique team order
    team, seen = [], set()
    for dept in CASE2_TEAM_REPLY:
        if dept not in seen:
            seen.add(dept)
            team.append(dept)
    opinions = [
        (dept, CASE2_TRANSCRIBED_OPINIONS.get(dept, case2_generic_opinion(dept)))
        for dept in team
    ]
    script = consensus_script(CASE2_FORMATION, opinions, CASE2_SUMMARY, CASE2_FINAL)
    write_jsonl(os.path.join(base, "script.jsonl"), script)


# --- cohort extraction fixture ---------------------------------------------

COHORT_PATIENTS = [
    # (patient, visit, codes, procedures, drugs)
    ("p1", "v1", ["E85.4", "I10"], ["0331"], ["Heparin"]),
    ("p1", "v2", ["I10"], [], ["Lisinopril"]),
    ("p2", "v1", ["E85.4"], [], ["Heparin"]),
    ("p3", "v1", ["I10"], [], ["Heparin"]),
    ("p3", "v2", ["I11"], [], ["Lisinopril"]),
    ("p4", "v1", ["E85.4"], ["0331"], ["Heparin"]),
    ("p4", "v2", ["I10"], [], []),
    ("p4", "v3", ["I10"], [], ["Sertraline"]),
    ("p5", "v1", ["I10"], [], ["Heparin"]),
    ("p5", "v2", ["277.3"], [], ["Lisinopril"]),
    ("p6", "v1", ["E85.4"], [], []),
    ("p6", "v2", ["I10"], [], ["Heparin"]),
    ("p6", "v3", ["I10"], [], ["Lisinopril"]),
    ("p7", "v1", ["E85.4"], [], ["Heparin"]),
    ("p7", "v2", [], ["0442"], ["Lisinopril"]),
    ("p8", "v1", ["E85.4", "D81.0"], ["0331", "0442"], ["Heparin", "Sertraline"]),
    ("p8", "v2", ["I10"], ["0442"], ["Lisinopril"]),
    ("p9", "v1", ["E85.4"], [], ["Heparin"]),
    ("p10", "v1", ["I10"], [], ["Heparin"]),
    ("p10", "v2", ["I12"], [], ["Lisinopril"]),
]


def gen_cohort():
    base = os.path.join(ROOT, "cohort")
    tables = os.path.join(base, "tables")
    diag = ["patient_id,visit_id,icd_version,icd_code"]
    proc = ["patient_id,visit_id,code"]
    rx = ["patient_id,visit_id,drug_name"]
    for patient, visit, codes, procs, drugs in COHORT_PATIENTS:
        version = lambda code: "9" if code[0].isdigit() else "10"
        for code in codes:
            diag.append(f"{patient},{visit},{version(code)},{code}")
        for p in procs:
            proc.append(f"{patient},{visit},{p}")
        for d in drugs:
            rx.append(f"{patient},{visit},{d}")
    write_text(os.path.join(tables, "diagnoses.csv"), "\n".join(diag) + "\n")
    write_text(os.path.join(tables, "procedures.csv"), "\n".join(proc) + "\n")
    write_text(os.path.join(tables, "prescriptions.csv"), "\n".join(rx) + "\n")
    mapping = [
        "icd_version,icd_code,rare_id,label",
        '10,E85.4,ORPHA:85443,E (Exact mapping: the two concepts are equivalent)',
        '9,277.3,ORPHA:85443,E (Exact mapping: the two concepts are equivalent)',
        '10,D81.0,OMIM:102700,E (Exact mapping: the two concepts are equivalent)',
        '10,G71.0,ORPHA:98895,NTBT (narrower term maps to broader term)',
    ]
    write_text(os.path.join(base, "mapping.csv"), "\n".join(mapping) + "\n")


# --- small batch-eval fixture (attending-only consultations) ---------------

EVAL_CASES = [
    ("c1", "Alpha Gold", "DIAGNOSIS:\n1. Alpha Gold\n2. Beta"),
    ("c2", "Beta Gold", "DIAGNOSIS:\n1. Wrong\n2. Beta Gold\n3. Other"),
    ("c3", "Gamma Gold", "DIAGNOSIS:\n1. Wrong\n2. Also Wrong"),
]


def gen_eval():
    base = os.path.join(ROOT, "eval")
    rows = []
    for i, (case_id, gold, _) in enumerate(EVAL_CASES):
        rows.append({
            "case_id": case_id,
            "symptoms": [
                {"id": f"HP:{i}01", "label": "Syncope"},
                {"id": f"HP:{i}02", "label": "Muscle weakness"},
                {"id": f"HP:{i}03", "label": "ST segment elevation"},
            ],
            "gold_diagnoses": [gold],
        })
    write_jsonl(os.path.join(base, "cases.jsonl"), rows)
    for case_id, _, reply in EVAL_CASES:
        write_jsonl(
            os.path.join(base, "scripts", f"{case_id}.jsonl"),
            [entry("attending", reply)],
        )


if __name__ == "__main__":
    gen_case1()
    gen_case2()
    gen_cohort()
    gen_eval()
    for sub in ("case1", "case2", "cohort", "eval"):
        for dirpath, _, files in os.walk(os.path.join(ROOT, sub)):
            for f in sorted(files):
                path = os.path.join(dirpath, f)
                print(f"{os.path.relpath(path, ROOT)}: {sum(1 for _ in open(path))} lines")
