#!/usr/bin/env python3
"""Writes the default hashtag-segmentation lexicon (word<TAB>count).

Counts follow a Zipf curve over the listed rank order; domain words are
appended with a flat mid-range count.
"""
import sys

COMMON = """
the be to of and a in that have i it for not on with he as you do at this but his by
from they we say her she or an will my one all would there their what so up out if about
who get which go me when make can like time no just him know take people into year your
good some could them see other than then now look only come its over think also back after
use two how our work first well way even new want because any these give day most us is
are was were been has had did said am very much more many such here where why again still
never always every each both few less own same too off down under while should must may
might need let keep feel try leave call ask tell show hear play run move live believe hold
bring happen write provide sit stand lose pay meet include continue set learn change lead
understand watch follow stop create speak read allow add spend grow open walk win offer
remember love consider appear buy wait serve die send expect build stay fall cut reach kill
remain suggest raise pass sell require report decide pull man woman women men child children
world life hand part place case week company system program question government number night
point home water room mother area money story fact month lot right study book eye job word
business issue side kind head house service friend father power hour game line end member law
car city community name president team minute idea kid body information school face others
level office door health person art war history party result morning reason research girl guy
moment air teacher force education foot boy age policy music market sense nation plan college
interest death experience effect class control care field development role effort rate heart
drug show leader light voice wife police mind price report decision son view relationship town
road arm difference value building action model season society tax director position player
record paper space ground form event official matter center couple site project activity star
table need court oil situation cost industry figure street image phone data picture practice
piece land product doctor wall patient worker news test movie north love support technology
step baby computer type attention film tree source organization hair window evidence population
site truth dog god black white red blue green big small old young long great little high low
bad best better worse worst real true false happy sad funny nice cool hot cold hard easy free
full sure wrong ready stupid dumb ugly pretty beautiful smart crazy sick fat gay straight
american african muslim muslims islam islamic christian jewish arab black white asian mexican
racist racism racists sexist sexism sexists feminist feminists feminism misogyny hate hater
haters hateful offensive neither burka burqa ban banned terror terrorist terrorists jihad
immigrant immigrants refugee refugees religion culture women girls female male equality rights
freedom speech free kat andre mkr cooking kitchen sandwich blonde bitch bitches hoe hoes trash
ghetto nigga niggas faggot fag coon queer retard retarded yes yeah okay ok lol lmao omg wtf
please thanks thank sorry hello hey hi bye today tonight tomorrow yesterday always forever
game games football sports team fans twitter tweet tweets follow followers retweet video
online social media news fake real vote trump obama hillary clinton america usa country
state states job jobs school class teacher student students
""".split()

def main(out):
    seen = set()
    words = []
    for w in COMMON:
        if w not in seen:
            seen.add(w)
            words.append(w)
    with open(out, "w", encoding="utf-8") as f:
        for rank, w in enumerate(words, start=1):
            count = max(1, int(1_000_000 / rank))
            f.write(f"{w}\t{count}\n")

if __name__ == "__main__":
    main(sys.argv[1] if len(sys.argv) > 1 else "data/lexicon.tsv")
